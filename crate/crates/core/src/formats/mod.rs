//! File formats: DOTA annotations, point files, the binary map container and
//! the run configuration.

mod binary;
mod config;
mod dota;

pub use binary::{read_cpm, read_target_map, write_cpm, write_target_map, MapHeader, HEADER_LEN};
pub use config::{load_config, AblateGrid, AssignVariant, Config, Paths, RenderParams};
pub use dota::{
    derive_points, format_sig6, instances_to_boxes, parse_dota, parse_points, write_dota,
    write_points, ClassTable, DotaInstance,
};
