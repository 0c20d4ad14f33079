//! Equilibrium clearing prices for externally liquidated claims and the
//! inverse demand functions they induce.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision to `f64`.

pub mod buhlmann;
pub mod clearing;
pub mod closed_forms;
pub mod error;
pub mod inverse_demand;
mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod risk_profile;
pub mod scalar;
pub mod scenario;

pub use buhlmann::{
    integrate_allocations, representative_profile, solve_equilibrium, AgentPopulation,
    AllocationTable, EquilibriumOptions, EquilibriumSolution, SolveMethod,
};
pub use clearing::{
    Certificate, ClearingProblem, ClearingResult, Existence, ExistenceDiagnosis, RootOptions,
    RootScan,
};
pub use closed_forms::{esscher_price, EsscherMarket};
pub use error::{Error, Result};
pub use inverse_demand::{
    cross_impact_grid, CrossImpactNode, DemandCurve, DemandPoint, Liquidation,
};
pub use risk_profile::{harmonic_aversion, AgentUtility, Domain, ProfileKind, RiskProfile};
pub use scalar::Scalar;
pub use scenario::{Law, RandomVariable, SamplingConfig, ScenarioFile, ScenarioSet, ScenarioSpace};

/// Double precision aliases.
pub type ScenarioSpaceF64 = ScenarioSpace<f64>;
pub type RandomVariableF64 = RandomVariable<f64>;
pub type RiskProfileF64 = RiskProfile<f64>;
pub type AgentUtilityF64 = AgentUtility<f64>;
pub type ClearingProblemF64 = ClearingProblem<f64>;
pub type ClearingResultF64 = ClearingResult<f64>;
pub type LiquidationF64 = Liquidation<f64>;
pub type AgentPopulationF64 = AgentPopulation<f64>;
pub type EquilibriumSolutionF64 = EquilibriumSolution<f64>;

/// Single precision aliases.
pub type ScenarioSpaceF32 = ScenarioSpace<f32>;
pub type RandomVariableF32 = RandomVariable<f32>;
pub type RiskProfileF32 = RiskProfile<f32>;
pub type ClearingProblemF32 = ClearingProblem<f32>;
pub type LiquidationF32 = Liquidation<f32>;
