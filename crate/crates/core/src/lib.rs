//! Exact computation with Lubin-Tate formal groups and the operator calculus
//! of `(φ_q, Γ)`-modules over truncated Robba-ring elements.

pub mod cohomology;
pub mod lubin_tate;
pub mod padic;
pub mod robba;
pub mod series;
pub mod triangulation;
pub mod verify;

pub use lubin_tate::{LTGroup, LtError, PhiChoice};
pub use padic::{Field, FieldElem, PadicError};
pub use series::{BivariateSeries, LaurentSeries, RingTag, SeriesError, Window};
pub use robba::{OperatorContext, RobbaError};
pub use cohomology::{Character, CocyclePair, CohomError, Cohomology, PiValue, Torsion};
pub use triangulation::{LInvariant, Stratum, TriError, TriParam};
