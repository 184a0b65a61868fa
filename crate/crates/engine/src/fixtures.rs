//! Reference samples built from the bundled catalog and a synthetic causal
//! process, for tests, demos and smoke runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symlaw_core::catalog::{cortical_network, default_grid, OdeEntry};
use symlaw_core::dynamics::{simulate_boolean, IntegratorConfig, Trajectory};
use symlaw_core::expr::{ScmGraph, Structure};
use symlaw_core::TaskKind;

use crate::sample::{Sample, SampleData};

/// Training data from the first published initial state, OOD data from the
/// second, both on the default grid.
pub fn ode_sample(entry: &OdeEntry) -> Sample {
    let cfg = IntegratorConfig::default();
    let grid = default_grid();
    let sim = |k| entry.simulate(k, &grid, &cfg).expect("catalog entries integrate");
    Sample {
        id: format!("ode-{:03}", entry.id),
        task: TaskKind::Cde,
        dim: entry.dim,
        domain: entry.name.to_string(),
        variables: (0..entry.dim).map(|i| format!("state variable {i}")).collect(),
        data: SampleData::Continuous {
            train: vec![sim(0)],
            ood: vec![sim(1)],
        },
        truth: Some(Structure::Cde(entry.system())),
        max_lag: None,
    }
}

fn bits(k: usize, dim: usize) -> Vec<u8> {
    (0..dim).map(|i| ((k >> (dim - 1 - i)) & 1) as u8).collect()
}

/// The cortical-area network observed for 6 steps from 16 initial states,
/// with the other 16 held out.
pub fn cortical_sample() -> Sample {
    let net = cortical_network();
    let (train_init, ood_init): (Vec<Vec<u8>>, Vec<Vec<u8>>) = {
        let all: Vec<Vec<u8>> = (0..32).map(|k| bits(k, 5)).collect();
        let (a, b): (Vec<_>, Vec<_>) = all.into_iter().enumerate().partition(|(k, _)| k % 2 == 0);
        (a.into_iter().map(|(_, s)| s).collect(), b.into_iter().map(|(_, s)| s).collect())
    };
    Sample {
        id: "bn-cortical".into(),
        task: TaskKind::Bn,
        dim: 5,
        domain: "Gene regulation during cortical area development".into(),
        variables: ["Fgf8", "Emx2", "Pax6", "Coup-tfi", "Sp8"]
            .iter()
            .map(|g| format!("expression of {g}"))
            .collect(),
        data: SampleData::Binary {
            train: simulate_boolean(&net, &train_init, 6).expect("valid states"),
            ood: simulate_boolean(&net, &ood_init, 6).expect("valid states"),
        },
        truth: Some(Structure::Bn(net)),
        max_lag: None,
    }
}

/// Lag-1 linear Gaussian process over three variables with edges
/// `0→0, 0→1, 1→1, 1→2, 2→2`.
pub fn linear_scm_sample(seed: u64, n: usize) -> Sample {
    let edges = [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 2), (2, 1, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut gen = |len: usize| {
        let mut x = vec![vec![0.0; 3]];
        for _ in 1..len + 50 {
            let p = x.last().unwrap().clone();
            x.push(vec![
                0.5 * p[0] + noise.sample(&mut rng),
                0.8 * p[0] + 0.3 * p[1] + noise.sample(&mut rng),
                0.7 * p[1] + 0.2 * p[2] + noise.sample(&mut rng),
            ]);
        }
        let values = x.split_off(50);
        Trajectory::new((0..len).map(|t| t as f64).collect(), values).expect("finite series")
    };
    let train = gen(n);
    let ood = gen(n);
    Sample {
        id: format!("scm-linear-{seed}"),
        task: TaskKind::Scm,
        dim: 3,
        domain: "Synthetic linear autoregressive process".into(),
        variables: vec!["upstream driver".into(), "mediator".into(), "downstream response".into()],
        data: SampleData::Continuous {
            train: vec![train],
            ood: vec![ood],
        },
        truth: Some(Structure::Scm(ScmGraph::new(3, 1, edges).expect("valid edges"))),
        max_lag: Some(1),
    }
}
