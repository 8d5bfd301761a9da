//! File formats: observation and result CSVs, GeoJSON buildings, SVG charts
//! and the experiment configuration.

mod config;
mod geo;
mod svg;
mod tables;

pub use config::{
    CompartmentalSection, CouplingSection, EstimationSection, ExperimentConfig, IoSection, ModelKind, PolicyPreset,
    PolicyRecord, PolicySpec, SeedSection, TownSection,
};
pub use geo::{buildings_to_geojson, load_buildings, parse_buildings, polygon_centroid, write_buildings};
pub use svg::{render_svg_chart, write_svg_chart, ChartSeries};
pub use tables::{
    load_observations, load_target, parse_observations, parse_target, read_table, write_counts_csv,
    write_observations_csv, write_table, write_target_csv, Table,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::estimation::SeriesError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: PathBuf, expected: String, found: String },
    #[error("{path}:{line}: {message}")]
    Row { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: {source}")]
    Series { path: PathBuf, line: u64, source: SeriesError },
    #[error("{path}:{line}:{column}: invalid JSON: {message}")]
    Json { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: feature {feature}: {message}")]
    Feature { path: PathBuf, feature: usize, message: String },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// The file the error refers to.
    pub fn path(&self) -> &Path {
        match self {
            Self::Io { path, .. }
            | Self::Header { path, .. }
            | Self::Row { path, .. }
            | Self::Series { path, .. }
            | Self::Json { path, .. }
            | Self::Feature { path, .. }
            | Self::Config { path, .. } => path,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}
