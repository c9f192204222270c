//! Gauge partitions, Henstock-Kurzweil sums and tangent-curve solvers for
//! generalized ODEs on metric spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod gode;
pub mod integration;
pub mod metric;
pub mod partition;
pub mod problems;
pub mod quadrature;
pub mod regulated;

use std::sync::Arc;

/// Shared scalar callable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub use gode::conditions::{
    check_class_f, check_u_conditions, check_weak_class, ClassFReport, ClassFSamples,
    ConditionReport, UReport, WeakClassReport, WeakClassSamples,
};
pub use gode::osgood::{
    check_osgood, phi, uniqueness_monitor, MonitorReport, MonitorVerdict, OsgoodOptions,
    OsgoodReport, OsgoodVerdict,
};
pub use gode::solver::{
    solution_defect, solve_on_partition, solve_tangent_euler, BackwardSolve, PartitionScheme,
    SolveReport, SolverError, SolverSettings, Trajectory,
};
pub use gode::{normalize_field, Ball, FieldError, FieldMetadata, ModulusFunction, TangentField};
pub use integration::{
    mc_verify, shk_defect, shk_stieltjes, stieltjes_sum, ControlFunction, CoupledIntegrand,
    IntegrationError, StepSchedule, StieltjesOptions, StieltjesReport,
};
pub use metric::{MetricError, MetricSpace, SpacePoint};
pub use partition::{
    cousin_partition, gauge_sequence, is_delta_fine, split_at_tags, Cell, Gauge, GaugeBase,
    PartitionError, TagPolicy, TagPosition, TaggedPartition,
};
pub use problems::{ProblemError, ProblemSpec};
pub use quadrature::QuadOptions;
pub use regulated::{
    is_equiregulated, oscillation_division, EquiregVerdict, Jump, ProbeSchedule, RegulatedError,
    RegulatedFunction, Side,
};
