//! Aircraft trajectory data pipeline and socially-aware multi-future
//! trajectory prediction for non-towered airport traffic.
//!
//! The crate covers the path from decoded ADS-B logs and METAR strings to
//! 1 Hz scene files ([`ingest`], [`geo`], [`scene`]), windowing into training
//! samples ([`dataset`]), a small autodiff engine ([`diff`]), the prediction
//! network ([`model`]), training and evaluation with baselines ([`train`],
//! [`eval`]), and a synthetic traffic-pattern generator ([`synth`]).

pub mod dataset;
pub mod diff;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod kinematics;
pub mod model;
pub mod plot;
pub mod provenance;
pub mod scene;
pub mod synth;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Geo(#[from] geo::GeoError),
    #[error(transparent)]
    Scene(#[from] scene::SceneError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Diff(#[from] diff::DiffError),
    #[error(transparent)]
    Checkpoint(#[from] diff::checkpoint::CheckpointError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
