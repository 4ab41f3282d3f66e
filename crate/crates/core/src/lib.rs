//! Zero-shot network intrusion detection in two stages: attribute learning
//! over known attack categories, then inference that represents instance
//! batches as points on the Grassmann manifold and ranks categories by
//! geodesic distance.
//!
//! Modules follow the pipeline order:
//!
//! * [`kdd`] — KDD Cup 99 / NSL-KDD parsing, attribute selection, encoding,
//!   and the known-class / zero-shot split.
//! * [`alnid`] — attribute learning: decision-tree induction, rule
//!   extraction, and frequency-based attribute reweighting.
//! * [`grassmann`] — the numerical kernel: thin SVD, rank selection,
//!   projector construction, principal logarithm, and subspace distances.
//! * [`inid`] — inference: batches known-class data, maps batches and a
//!   zero-shot matrix onto the Grassmannian, and ranks categories by mean
//!   geodesic distance.
//! * [`zsl`] — K-NN prediction models over Grassmannian and Frobenius
//!   instance distances, with accuracy / log-loss / AUC evaluation.

pub mod alnid;
pub mod grassmann;
pub mod inid;
pub mod kdd;
pub mod zsl;

pub use grassmann::{DistanceEngine, GrassmannError, GrassmannPoint, OrthonormalFrame};
pub use kdd::{AttackTaxonomy, Category, DatasetFormat, FeatureMatrix, IngestError, SourceTag};
