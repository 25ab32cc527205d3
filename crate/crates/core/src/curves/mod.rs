//! Curves in center leaves and in strong leaves, and the constructions
//! built from them.

pub mod center;
pub mod good;
pub mod holonomy;
pub mod leaf;
pub mod mixing;

pub use center::{advance, extract_cone_subcurves, iterate_center_curve, BoxSet, CenterCurve};
pub use holonomy::{heteroclinic_base, heteroclinic_center, holonomy, holonomy_defect, BaseCrossing};
pub use mixing::{mixing_intersection, mixing_sweep, MixingConfig, MixingOrbit, MixingSetup};
pub use leaf::{grow_leaf_segment, leaf_point, LeafChart, LeafSegment};
