use nalgebra::DMatrix;
use proptest::prelude::*;

use cellfree::closedform::{evaluate, maximal_ratio_power, MrNormalization, PowerAllocation, Scheme};
use cellfree::config::UplinkPilotMode;
use cellfree::oracle::{compare, estimate_ds_bu_ui};
use cellfree::{build_snapshot, Snapshot, SystemConfig};

#[test]
fn orthogonal_pilots_leave_only_noncoherent_interference() {
    let cfg = SystemConfig {
        num_aps: 4,
        antennas: 4,
        num_users: 3,
        area_side: 100.0,
        tau_up: 3,
        tau_dp: 3,
        cluster_min: 2,
        ul_pilot_mode: UplinkPilotMode::Orthogonal,
        ..SystemConfig::default()
    };
    let snap = build_snapshot(&cfg, 21).unwrap();
    let (b, g) = (&snap.beta, &snap.gamma);
    let n = cfg.antennas as f64;
    let rho = cfg.rho_d;
    for scheme in [Scheme::Cb, Scheme::Ncb, Scheme::Ecb] {
        let alloc = maximal_ratio_power(&snap, scheme, cfg.antennas, MrNormalization::Cluster);
        let eta = &alloc.eta;
        let est = estimate_ds_bu_ui(&snap, &alloc, &cfg, 40_000, 5).unwrap();
        for k in 0..3 {
            for j in (0..3).filter(|&j| j != k) {
                let noncoherent: f64 = (0..4)
                    .map(|m| match scheme {
                        Scheme::Cb => rho * n * eta[(m, j)] * b[(m, k)] * g[(m, j)],
                        Scheme::Ncb => rho * eta[(m, j)] * b[(m, k)],
                        _ => rho * eta[(m, j)] * b[(m, k)] / ((n - 1.0) * g[(m, j)]),
                    })
                    .sum();
                let c = compare(noncoherent, &est.interference[k][j], 4.5);
                assert!(c.pass, "{scheme}: {c}");
            }
        }
    }
}

fn permuted(snap: &Snapshot, perm: &[usize], cfg: &SystemConfig) -> Snapshot {
    let (m, k) = snap.beta.shape();
    let beta = DMatrix::from_fn(m, k, |ap, u| snap.beta[(ap, perm[u])]);
    let ul = perm.iter().map(|&p| snap.ul_pilot[p]).collect();
    let dl = snap.dl_pilot.as_ref().map(|d| perm.iter().map(|&p| d[p]).collect());
    let clusters = perm.iter().map(|&p| snap.clusters[p].clone()).collect();
    Snapshot::from_beta(beta, ul, dl, clusters, cfg.tau_up, cfg.rho_u).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relabeling_users_permutes_the_reports(seed in 0u64..10_000, rot in 1usize..5) {
        let cfg = SystemConfig {
            num_aps: 10,
            antennas: 4,
            num_users: 5,
            area_side: 150.0,
            tau_up: 2,
            tau_dp: 5,
            cluster_min: 3,
            ..SystemConfig::default()
        };
        let snap = build_snapshot(&cfg, seed).unwrap();
        let perm: Vec<usize> = (0..5).map(|u| (u + rot) % 5).collect();
        let other = permuted(&snap, &perm, &cfg);
        for scheme in Scheme::ALL {
            let alloc = maximal_ratio_power(&snap, scheme, 4, MrNormalization::Cluster);
            let moved = PowerAllocation {
                eta: DMatrix::from_fn(10, 5, |ap, u| alloc.eta[(ap, perm[u])]),
                scheme,
            };
            let a = evaluate(&snap, &alloc, &cfg).unwrap();
            let b = evaluate(&other, &moved, &cfg).unwrap();
            for (u, &p) in perm.iter().enumerate() {
                let (x, y) = (a.sinr[p], b.sinr[u]);
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), "{} user {}: {} vs {}", scheme, u, x, y);
            }
        }
    }
}
