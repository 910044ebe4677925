//! Ahlfors-regular test sets, empirical Hausdorff-measure estimates,
//! box-counting dimension and the dimension-adapted smoothing kernel.

mod dimension;
mod generators;
mod kernel;
mod profile;

pub use dimension::{
    ahlfors_constants, box_counting_dimension, default_scale_range, dyadic_scales, local_measure, AhlforsOptions,
    AhlforsReport, DimensionFit,
};
pub use generators::{generate_cantor, generate_sierpinski, CANTOR_DIM, SIERPINSKI_DIM};
pub use kernel::{
    approximate_identity_error, covering_grid, fractal_smooth, h5_lower_bound, kernel_eval, kernel_integral, kernel_normalizer,
    H5Report, KernelSpec, KernelSummary, QuadratureSpec,
};
pub use profile::{build_profile, profile_names, RadialProfile, RhoSpec};
