//! Unsupervised outlier detection with dictionary learning.
//!
//! Signals are the columns of a [`SignalMatrix`]. A dictionary is learned so
//! that most signals get a good sparse representation; the score of a signal
//! is the norm of its representation error, so poorly represented signals are
//! flagged as outliers.
//!
//! Four detector families are provided:
//!
//! * plain dictionary learning (OMP coding + AK-SVD updates),
//! * selective dictionary learning, which samples a random subset of signals
//!   every iteration and drops the worst represented ones before the update,
//! * reduced kernel dictionary learning, with atoms expressed over the feature
//!   images of either a sampled signal batch or a pre-trained linear dictionary,
//! * the selective forms of the reduced kernel variants.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! command-line tool uses.

pub mod datasets;
pub mod detector;
pub mod dl;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod omp;
pub mod rng;
pub mod scalar;
pub mod signal;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use rng::RngSeed;
pub use scalar::Real;
pub use signal::{Dictionary, SignalMatrix, SparseCode, SparseVector};

pub type Mat64 = Mat<f64>;
pub type SignalMatrix64 = SignalMatrix<f64>;
pub type Dictionary64 = Dictionary<f64>;
pub type SparseCode64 = SparseCode<f64>;
pub type KernelSpec64 = kernel::KernelSpec<f64>;
pub type KernelBase64 = kernel::KernelBase<f64>;
pub type KernelDictionary64 = kernel::KernelDictionary<f64>;
pub type DetectorModel64 = detector::DetectorModel<f64>;
pub type LabeledDataset64 = datasets::LabeledDataset<f64>;

pub type Mat32 = Mat<f32>;
pub type SignalMatrix32 = SignalMatrix<f32>;
pub type Dictionary32 = Dictionary<f32>;
pub type DetectorModel32 = detector::DetectorModel<f32>;
