//! Classification trees grown by rolling two-step lookahead.
//!
//! At every frontier node an exact optimal depth-2 tree is found from
//! precomputed leaf-rule costs ([`oct2`]), only the node's own split is
//! kept, and the children are re-optimized in later rolls ([`rst`]). The
//! depth-2 problem decomposes per root feature because its constraint matrix
//! is totally unimodular, so no LP or MIO solver is needed.
//!
//! ```
//! use rolltree::data::BinaryDataset;
//! use rolltree::loss::LossKind;
//! use rolltree::rst::{rst_fit, FitConfig};
//!
//! let rows = vec![
//!     vec![true, false, true],
//!     vec![true, false, false],
//!     vec![false, false, true],
//!     vec![true, true, true],
//! ];
//! let ds = BinaryDataset::from_rows(
//!     &rows,
//!     vec![0, 1, 1, 1],
//!     vec!["A".into(), "B".into()],
//!     vec!["x1".into(), "x2".into(), "x3".into()],
//! )
//! .unwrap();
//! let tree = rst_fit(&ds, &FitConfig::rst(3, LossKind::Gini)).unwrap();
//! assert_eq!(tree.accuracy(&ds, &ds.all_indices()), 1.0);
//! ```

pub mod bitset;
pub mod data;
pub mod datasets;
mod error;
pub mod experiment;
pub mod loss;
pub mod oct2;
pub mod oct3;
pub mod rst;
pub mod tree;

pub use data::{BinarizationSchema, BinaryDataset, FoldAssignment, NodeSubset, RawDataset};
pub use error::{Error, Result};
pub use loss::{LeafCostTable, LossKind};
pub use oct2::{Oct2Config, Oct2Solution};
pub use oct3::Oct3Solution;
pub use rst::{FitConfig, Lookahead, Strategy};
pub use tree::DecisionTree;
