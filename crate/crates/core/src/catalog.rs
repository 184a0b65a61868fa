//! Reference systems from the ODEBench collection and a cortical-area
//! Boolean network, used as fixtures and for round-trip checks.

use crate::dynamics::{integrate_ode, DynamicsError, FittedModel, IntegratorConfig, Trajectory};
use crate::expr::{parse_boolean, AlgebraicSystem, BooleanNetwork};

/// One ODEBench system with its published parameters and two initial states.
#[derive(Debug, Clone, Copy)]
pub struct OdeEntry {
    pub id: u32,
    pub name: &'static str,
    /// Right-hand sides with indexed placeholders `c_k` matching `params`.
    pub skeleton: &'static str,
    pub dim: usize,
    pub params: &'static [f64],
    pub inits: [&'static [f64]; 2],
}

impl OdeEntry {
    pub fn system(&self) -> AlgebraicSystem {
        AlgebraicSystem::parse(self.skeleton, self.dim).expect("catalog skeletons parse")
    }

    pub fn true_model(&self) -> FittedModel {
        FittedModel::with_coefficients(self.system(), self.params.to_vec())
    }

    /// Trajectory from initial state `which` (0 or 1) on `times`.
    pub fn simulate(
        &self,
        which: usize,
        times: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, DynamicsError> {
        integrate_ode(&self.true_model(), self.inits[which], times, cfg)
    }
}

/// Uniform grid of `n` points on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// The default sampling grid for catalog systems: 500 points on [0, 10].
///
/// Coarser grids bias three-point derivative estimates around fast
/// transitions; at 150 points the Allee-effect entry refits to R² ≈ 0.99.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(10.0, 500)
}

macro_rules! scalar {
    ($id:expr, $name:expr, $sk:expr, [$($p:expr),*], $a:expr, $b:expr) => {
        OdeEntry { id: $id, name: $name, skeleton: $sk, dim: 1, params: &[$($p),*], inits: [&[$a], &[$b]] }
    };
}

pub const SCALAR_ODES: [OdeEntry; 23] = [
    scalar!(1, "RC-circuit (charging capacitor)", "(c_0 - x_0/c_1)/c_2", [0.7, 1.2, 2.31], 10.0, 3.54),
    scalar!(2, "Population growth (naive)", "c_0*x_0", [0.23], 4.78, 0.87),
    scalar!(3, "Population growth with carrying capacity", "c_0*x_0*(1 - x_0/c_1)", [0.79, 74.3], 7.3, 21.0),
    scalar!(4, "RC-circuit with non-linear resistor", "-0.5 + 1/(exp(c_0 - x_0/c_1) + 1)", [0.5, 0.96], 0.8, 0.02),
    scalar!(5, "Velocity of a falling object with air resistance", "c_0 - c_1*x_0**2", [9.81, 0.0021175], 0.5, 73.0),
    scalar!(6, "Autocatalysis with one fixed abundant chemical", "c_0*x_0 - c_1*x_0**2", [2.1, 0.5], 0.13, 2.24),
    scalar!(7, "Gompertz law for tumor growth", "c_0*x_0*log(c_1*x_0)", [0.032, 2.29], 1.73, 9.5),
    scalar!(8, "Logistic equation with Allee effect", "c_0*x_0*(-1 + x_0/c_2)*(1 - x_0/c_1)", [0.14, 130.0, 4.4], 6.123, 2.1),
    scalar!(9, "Language death model for two languages", "c_0*(1 - x_0) - c_1*x_0", [0.32, 0.28], 0.14, 0.55),
    scalar!(10, "Refined language death model for two languages", "c_0*x_0**c_1*(1 - x_0) - x_0*(1 - c_0)*(1 - x_0)**c_1", [0.2, 1.2], 0.83, 0.34),
    scalar!(11, "Naive critical slowing down", "-x_0**3", [], 3.4, 1.6),
    scalar!(12, "Photons in a laser (simple)", "c_0*x_0 - c_1*x_0**2", [1.8, 0.1107], 11.0, 1.3),
    scalar!(13, "Overdamped bead on a rotating hoop", "c_0*(c_1*cos(x_0) - 1)*sin(x_0)", [0.0981, 9.7], 3.1, 2.4),
    scalar!(14, "Budworm outbreak model with predation", "c_0*x_0*(1 - x_0/c_1) - c_3*x_0**2/(c_2**2 + x_0**2)", [0.78, 81.0, 21.2, 0.9], 2.76, 23.3),
    scalar!(15, "Budworm outbreak with predation (dimensionless)", "c_0*x_0*(1 - x_0/c_1) - x_0**2/(x_0**2 + 1)", [0.4, 95.0], 44.3, 4.5),
    scalar!(16, "Landau equation", "c_0*x_0 - c_1*x_0**3 - c_2*x_0**5", [0.1, -0.04, 0.001], 0.94, 1.65),
    scalar!(17, "Logistic equation with harvesting", "c_0*x_0*(1 - x_0/c_1) - c_2", [0.4, 100.0, 0.3], 14.3, 34.2),
    scalar!(18, "Improved logistic equation with harvesting", "c_0*x_0*(1 - x_0/c_1) - c_2*x_0/(c_3 + x_0)", [0.4, 100.0, 0.24, 50.0], 21.1, 44.1),
    scalar!(19, "Improved logistic equation with harvesting (dimensionless)", "-c_0*x_0/(c_1 + x_0) + x_0*(1 - x_0)", [0.08, 0.8], 0.13, 0.03),
    scalar!(20, "Autocatalytic gene switching (dimensionless)", "c_0 - c_1*x_0 + x_0**2/(x_0**2 + 1)", [0.1, 0.55], 0.002, 0.25),
    scalar!(21, "Reduced SIR model for dead people (dimensionless)", "c_0 - c_1*x_0 - exp(-x_0)", [1.2, 0.2], 0.0, 0.8),
    scalar!(22, "Hysteretic activation of a protein expression", "c_0 + c_1*x_0**5/(c_2 + x_0**5) - c_3*x_0", [1.4, 0.4, 123.0, 0.89], 3.1, 6.3),
    scalar!(23, "Overdamped pendulum with constant driving torque", "c_0 - sin(x_0)", [0.21], -2.74, 1.65),
];

pub const HARMONIC_OSCILLATOR: OdeEntry = OdeEntry {
    id: 24,
    name: "Harmonic oscillator without damping",
    skeleton: "x_1 | -c_0*x_0",
    dim: 2,
    params: &[2.1],
    inits: [&[0.4, -0.03], &[0.0, 0.2]],
};

pub const SEIR: OdeEntry = OdeEntry {
    id: 63,
    name: "SEIR infection model (proportions)",
    skeleton: "-c_1*x_0*x_2 | -c_0*x_1 + c_1*x_0*x_2 | c_0*x_1 - c_2*x_2 | c_2*x_2",
    dim: 4,
    params: &[0.47, 0.28, 0.3],
    inits: [&[0.6, 0.3, 0.09, 0.01], &[0.4, 0.3, 0.25, 0.05]],
};

/// Five-node cortical-area development network.
pub const CORTICAL_RULES: [&str; 5] = [
    "x1 = ( NOT ( x3 OR x5 ) OR NOT ( x5 OR x3 ) )",
    "x2 = ( x1 AND NOT ( ( x3 OR x5 ) OR x4 ) )",
    "x3 = ( ( x3 AND x5 ) AND NOT x2 )",
    "x4 = ( x5 AND NOT ( x2 OR x1 ) )",
    "x5 = ( x3 AND NOT x2 )",
];

pub fn cortical_network() -> BooleanNetwork {
    parse_boolean(&CORTICAL_RULES, 5).expect("catalog rules parse")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses_with_matching_parameter_count() {
        for e in SCALAR_ODES.iter().chain([&HARMONIC_OSCILLATOR, &SEIR]) {
            let s = e.system();
            assert_eq!(s.num_coefficients(), e.params.len(), "entry {}", e.id);
            assert_eq!(e.inits[0].len(), e.dim);
            assert_eq!(e.inits[1].len(), e.dim);
        }
    }

    #[test]
    fn all_scalar_entries_integrate_on_the_default_grid() {
        let cfg = IntegratorConfig::default();
        for e in &SCALAR_ODES {
            for which in 0..2 {
                e.simulate(which, &default_grid(), &cfg)
                    .unwrap_or_else(|err| panic!("entry {} init {which}: {err}", e.id));
            }
        }
    }
}
