use std::collections::HashMap;
use std::fmt::Write as _;

use crate::assign::PointAnnotation;
use crate::error::{invalid, Error, Result};
use crate::geometry::{corners_to_obb, Corners, OrientedBox, Point};

/// One DOTA record: four vertices, a category token and a difficulty flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DotaInstance {
    pub corners: Corners,
    pub category: String,
    pub difficulty: u8,
}

impl DotaInstance {
    pub fn from_box(bbox: &OrientedBox, category: impl Into<String>) -> Self {
        Self {
            corners: bbox.corners(),
            category: category.into(),
            difficulty: 0,
        }
    }
}

/// Ordered category names; the position of a name is its class id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassTable {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl ClassTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut table = ClassTable::default();
        for name in names {
            let name = name.into();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(invalid(format!("invalid category name `{name}`")));
            }
            if table.ids.insert(name.clone(), table.names.len()).is_some() {
                return Err(invalid(format!("duplicate category `{name}`")));
            }
            table.names.push(name);
        }
        Ok(table)
    }

    /// One name per line; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("category `{line}` contains whitespace"),
                });
            }
            names.push(line.to_string());
        }
        ClassTable::new(names)
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownCategory(name.to_string()))
    }

    pub fn name(&self, id: usize) -> Result<&str> {
        self.names
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| invalid(format!("class id {id} not in table")))
    }
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("`{token}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            reason: format!("`{token}` is not finite"),
        });
    }
    Ok(v)
}

/// Parses DOTA text, skipping `imagesource:`/`gsd:` headers and blank lines.
pub fn parse_dota(text: &str) -> Result<Vec<DotaInstance>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("imagesource:") || trimmed.starts_with("gsd:") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 10 fields, found {}", fields.len()),
            });
        }
        let mut coords = [0.0; 8];
        for (c, f) in coords.iter_mut().zip(&fields[..8]) {
            *c = parse_float(f, line)?;
        }
        let difficulty = match fields[9] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    reason: format!("difficulty must be 0 or 1, found `{other}`"),
                })
            }
        };
        out.push(DotaInstance {
            corners: Corners([
                Point::new(coords[0], coords[1]),
                Point::new(coords[2], coords[3]),
                Point::new(coords[4], coords[5]),
                Point::new(coords[6], coords[7]),
            ]),
            category: fields[8].to_string(),
            difficulty,
        });
    }
    Ok(out)
}

/// Formats `v` with at most six significant digits, in plain decimal.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float reparses");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

pub fn write_dota(instances: &[DotaInstance]) -> String {
    let mut s = String::new();
    for inst in instances {
        for p in &inst.corners.0 {
            let _ = write!(s, "{} {} ", format_sig6(p.x), format_sig6(p.y));
        }
        let _ = writeln!(s, "{} {}", inst.category, inst.difficulty);
    }
    s
}

/// Converts records to rectangle fits with class ids.
pub fn instances_to_boxes(
    instances: &[DotaInstance],
    table: &ClassTable,
) -> Result<Vec<(OrientedBox, usize)>> {
    instances
        .iter()
        .map(|i| Ok((corners_to_obb(&i.corners)?, table.id(&i.category)?)))
        .collect()
}

/// One point per record at the vertex centroid.
pub fn derive_points(instances: &[DotaInstance], table: &ClassTable) -> Result<Vec<PointAnnotation>> {
    instances
        .iter()
        .map(|i| {
            let c = i.corners.centroid();
            Ok(PointAnnotation::new(c.x, c.y, table.id(&i.category)?))
        })
        .collect()
}

/// Parses `x y category` lines; blank lines are skipped.
pub fn parse_points(text: &str, table: &ClassTable) -> Result<Vec<PointAnnotation>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!("expected `x y category`, found {} fields", fields.len()),
            });
        }
        let x = parse_float(fields[0], line)?;
        let y = parse_float(fields[1], line)?;
        let class_id = table.id(fields[2]).map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        out.push(PointAnnotation::new(x, y, class_id));
    }
    Ok(out)
}

/// Writes points at full precision so they reparse bit-identically.
pub fn write_points(points: &[PointAnnotation], table: &ClassTable) -> Result<String> {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, table.name(p.class_id)?);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lines_skipped() {
        let t = "imagesource:GoogleEarth\ngsd:0.1\n10 10 20 10 20 20 10 20 plane 0\n";
        let v = parse_dota(t).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].category, "plane");
        assert_eq!(v[0].corners.0[2], Point::new(20.0, 20.0));
    }

    #[test]
    fn arity_and_value_errors_carry_line() {
        let t = "\n10 10 20 10 20 20 10 20 plane 0\n10 10 20 10 20 20 10 plane 0\n";
        assert!(matches!(parse_dota(t), Err(Error::Parse { line: 3, .. })));
        let t = "10 10 20 10 20 2x0 10 20 plane 0\n";
        assert!(matches!(parse_dota(t), Err(Error::Parse { line: 1, .. })));
        let t = "10 10 20 10 20 20 10 20 plane 2\n";
        assert!(matches!(parse_dota(t), Err(Error::Parse { line: 1, .. })));
        let t = "10 10 20 10 20 nan 10 20 plane 0\n";
        assert!(parse_dota(t).is_err());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(123.456789), "123.457");
        assert_eq!(format_sig6(10.0), "10");
        assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig6(1234567.0), "1234570");
        assert_eq!(format_sig6(-0.0), "0");
    }

    #[test]
    fn write_and_reparse() {
        let t = "1.5 2 3 4 5 6 7 8 small-vehicle 1\n";
        let v = parse_dota(t).unwrap();
        assert_eq!(write_dota(&v), t);
        assert_eq!(write_dota(&[]), "");
    }

    #[test]
    fn centroid_points() {
        let table = ClassTable::new(["plane", "ship"]).unwrap();
        let v = parse_dota("0 0 2 0 2 2 0 2 ship 0\n").unwrap();
        assert_eq!(derive_points(&v, &table).unwrap(), vec![PointAnnotation::new(1.0, 1.0, 1)]);
        let b = OrientedBox::new(3.3, -7.1, 5.0, 2.0, 0.77).unwrap();
        let c = b.corners().centroid();
        assert!((c.x - 3.3).abs() < 1e-9 && (c.y + 7.1).abs() < 1e-9);
        let v = parse_dota("0 0 2 0 2 2 0 2 blimp 0\n").unwrap();
        assert_eq!(derive_points(&v, &table), Err(Error::UnknownCategory("blimp".into())));
    }

    #[test]
    fn class_table_rules() {
        assert!(ClassTable::new(["a", "a"]).is_err());
        assert!(ClassTable::new(["a b"]).is_err());
        let t = ClassTable::parse("plane\n\nship\n").unwrap();
        assert_eq!(t.id("ship").unwrap(), 1);
        assert_eq!(t.to_text(), "plane\nship\n");
        assert!(t.name(2).is_err());
    }

    #[test]
    fn points_round_trip_exactly() {
        let table = ClassTable::new(["a", "b"]).unwrap();
        let pts = vec![
            PointAnnotation::new(0.1 + 0.2, 1.0 / 3.0, 1),
            PointAnnotation::new(400.0, 7.25, 0),
        ];
        let text = write_points(&pts, &table).unwrap();
        assert_eq!(parse_points(&text, &table).unwrap(), pts);
        assert!(matches!(parse_points("1 2\n", &table), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_points("\n1 2 c\n", &table), Err(Error::Parse { line: 2, .. })));
    }
}
