use std::fmt::Write as _;
use std::time::Instant;

/// Ordered `key = value` run record.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Adds `by` to an integer counter.
    pub fn bump(&mut self, key: &str, by: usize) {
        let now = self.get(key).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
        self.set(key, now + by);
    }

    /// Runs `f` and records its wall time as `timing.<stage>_s`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.set(format!("timing.{stage}_s"), format!("{:.6}", start.elapsed().as_secs_f64()));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
