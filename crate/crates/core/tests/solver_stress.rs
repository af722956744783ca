//! Training across benchmarks, kernels, penalties and noisy Gram matrices.

use qkernel::bench::{run_benchmark, BenchmarkConfig, DatasetKind, NoiseSettings};
use qkernel::svm::KKT_TOL;

#[test]
fn every_configuration_trains_to_tolerance() {
    for kind in DatasetKind::ALL {
        for seed in [0, 3, 16] {
            for kernel in ["cosine:1/2", "cosine:1", "cosine:3", "msi:4"] {
                for gamma in [1.0, 100.0] {
                    for noisy in [false, true] {
                        let mut cfg = BenchmarkConfig::new(kind, seed, kernel);
                        cfg.gamma = gamma;
                        cfg.grid_side = 2;
                        if noisy {
                            cfg.noise = Some(NoiseSettings {
                                events: 500,
                                fidelity: 0.9,
                                seed,
                                pin_diagonal: false,
                            });
                        }
                        let summary = run_benchmark(&cfg)
                            .unwrap_or_else(|e| panic!("{kind} {seed} {kernel} {gamma} {noisy}: {e}"))
                            .summary;
                        assert!(summary.kkt_residual < KKT_TOL, "{kind} {seed} {kernel}: {}", summary.kkt_residual);
                    }
                }
            }
        }
    }
}
