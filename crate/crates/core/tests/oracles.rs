mod common;

use std::f64::consts::LN_2;

use circulator_core::beamformers::{
    build_xi, precoder_system, solve_power_constrained, update_combiner, update_precoder, BisectionParams,
};
use circulator_core::channel::{effective_channels, next, prev};
use circulator_core::linalg::{
    complex_gaussian, complex_gaussian_vec, hermitian_part, random_unitary, symmetrize, unitarity_error,
};
use circulator_core::metrics::{interference_power, sinr};
use circulator_core::scattering::{
    assemble_group_subproblem, assemble_trace_form, augmented_lagrangian, build_maps, curvature_scale,
    pdd_outer_update, run_pdd, update_phi_group, update_psi_group, GroupSolver, OuterBranch, PddParams, RisState,
};
use circulator_core::surrogate::{eval_f_iota, eval_f_tau, update_iota, update_tau};
use circulator_core::{
    weighted_sum_rate, BeamformerState, CMat, CVec, Error, Reciprocity, RisArchitecture, SurrogateState, C64,
};
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

fn f_tau(inst: &Instance, bf: &BeamformerState, sur: &SurrogateState) -> f64 {
    eval_f_tau(bf, &inst.eff, &inst.ch, sur, &inst.sc)
}

fn small_configs() -> Vec<circulator_core::ScenarioConfig> {
    let base = unit_config(3, 2, RisArchitecture::fully_connected(4, Reciprocity::NonReciprocal));
    let mut structural = base.clone();
    structural.structural_scattering = true;
    let mut direct = base.clone();
    direct.direct_links = true;
    direct.structural_scattering = true;
    direct.ris = RisArchitecture::group_connected(4, 2, Reciprocity::Reciprocal);
    vec![base, structural, direct]
}

#[test]
fn sinr_matches_explicit_signal_model() {
    for (c, cfg) in small_configs().into_iter().enumerate() {
        let inst = random_instance(&cfg, 10 + c as u64);
        let users = inst.sc.users();
        let mut t = inst.phi.clone();
        if inst.sc.structural() {
            t -= CMat::identity(t.nrows(), t.ncols());
        }
        // Link from transmitting user j into receiving user k.
        let link = |k: usize, j: usize| -> CMat {
            let cascaded = inst.ch.h_ref[k].transpose() * &t * &inst.ch.h_ref[j];
            if j == k {
                inst.ch.h_si(k) + cascaded
            } else {
                inst.ch.h_dir[k][j].transpose() + cascaded
            }
        };
        for k in 0..users {
            let w = &inst.bf.combiners[k];
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..users {
                // User j transmits the stream destined for user j + 1.
                let a = w.dotc(&(link(k, j) * &inst.bf.precoders[next(j, users)])).norm_sqr();
                if j == prev(k, users) {
                    signal = a;
                } else {
                    interference += a;
                }
            }
            let expected = signal / (interference + w.norm_squared() * inst.sc.noise_w);
            let got = sinr(k, &inst.bf, &inst.eff, &inst.ch, inst.sc.noise_w);
            assert!(rel_close(got, expected, 1e-12), "user {k}: {got} vs {expected}");
            let i_got = interference_power(k, &inst.bf, &inst.eff, &inst.ch);
            assert!(rel_close(i_got, interference, 1e-12));
        }
    }
}

#[test]
fn surrogate_is_tight_after_auxiliary_updates() {
    for seed in 0..20 {
        let cfg = &small_configs()[seed as usize % 3];
        let mut inst = random_instance(cfg, 100 + seed);
        inst.sur.iota = update_iota(&inst.bf, &inst.eff, &inst.ch, &inst.sc);
        inst.sur.tau = update_tau(&inst.bf, &inst.eff, &inst.ch, &inst.sur.iota, &inst.sc);
        let fo = weighted_sum_rate(&inst.bf, &inst.eff, &inst.ch, &inst.sc).weighted_sum;
        let ft = f_tau(&inst, &inst.bf, &inst.sur);
        let fi = eval_f_iota(&inst.bf, &inst.eff, &inst.ch, &inst.sur.iota, &inst.sc);
        assert!((ft - fo).abs() <= 1e-8 * (1.0 + fo.abs()), "{ft} vs {fo}");
        assert!((fi - fo).abs() <= 1e-8 * (1.0 + fo.abs()), "{fi} vs {fo}");
    }
}

#[test]
fn surrogate_lower_bounds_the_rate_for_any_auxiliaries() {
    for seed in 0..20 {
        let cfg = &small_configs()[seed as usize % 3];
        let inst = random_instance(cfg, 200 + seed);
        let fo = weighted_sum_rate(&inst.bf, &inst.eff, &inst.ch, &inst.sc).weighted_sum;
        assert!(f_tau(&inst, &inst.bf, &inst.sur) <= fo + 1e-12);
    }
}

#[test]
fn iota_update_maximizes_its_surrogate() {
    let mut r = rng(7);
    for seed in 0..20 {
        let inst = random_instance(&small_configs()[seed as usize % 3], 300 + seed);
        let opt = update_iota(&inst.bf, &inst.eff, &inst.ch, &inst.sc);
        let best = eval_f_iota(&inst.bf, &inst.eff, &inst.ch, &opt, &inst.sc);
        for _ in 0..1000 {
            let probe: Vec<f64> = opt
                .iter()
                .map(|x| (x * r.random_range(0.0..3.0) + r.random_range(-0.1..0.1)).max(0.0))
                .collect();
            assert!(eval_f_iota(&inst.bf, &inst.eff, &inst.ch, &probe, &inst.sc) <= best + 1e-12);
        }
        for k in 0..3 {
            let h = 1e-5 * (1.0 + opt[k]);
            let at = |d: f64| {
                let mut x = opt.clone();
                x[k] += d;
                eval_f_iota(&inst.bf, &inst.eff, &inst.ch, &x, &inst.sc)
            };
            let g = (at(h) - at(-h)) / (2.0 * h);
            assert!(g.abs() < 1e-6, "d f / d iota_{k} = {g}");
        }
    }
}

#[test]
fn tau_update_is_optimal_and_stationary() {
    let mut r = rng(8);
    for seed in 0..20 {
        let inst = random_instance(&small_configs()[seed as usize % 3], 400 + seed);
        let mut sur = inst.sur.clone();
        sur.tau = update_tau(&inst.bf, &inst.eff, &inst.ch, &sur.iota, &inst.sc);
        let best = f_tau(&inst, &inst.bf, &sur);
        for _ in 0..1000 {
            let mut probe = sur.clone();
            for t in probe.tau.iter_mut() {
                *t = *t * r.random_range(0.0..2.0) * random_phase(&mut r);
            }
            assert!(f_tau(&inst, &inst.bf, &probe) <= best + 1e-12 * (1.0 + best.abs()));
        }
        let tau = CVec::from_vec(sur.tau.clone());
        let scale = tau.norm();
        let g = fd_gradient(&tau, 1e-4 * scale, |x| {
            let mut s = sur.clone();
            s.tau = x.iter().copied().collect();
            f_tau(&inst, &inst.bf, &s)
        });
        // `f_τ` is quadratic in `τ`: its gradient scale is `(1+ι)|d| / ln 2 ~ |f| / |τ|`.
        assert!(g.norm() * scale < 1e-6 * (1.0 + best.abs()), "gradient {}", g.norm());
    }
}

#[test]
fn precoder_update_is_optimal_and_satisfies_kkt() {
    let mut r = rng(9);
    for seed in 0..20 {
        let inst = random_instance(&small_configs()[seed as usize % 3], 500 + seed);
        let users = inst.sc.users();
        for k in 0..users {
            let budget = inst.sc.tx_power_w[prev(k, users)];
            let (p, mu) = update_precoder(k, &inst.bf, &inst.eff, &inst.ch, &inst.sur, &inst.sc).unwrap();
            assert!(p.norm_squared() <= budget * (1.0 + 1e-10));
            assert!(mu >= 0.0);
            if mu > 0.0 {
                assert!((p.norm_squared() - budget).abs() <= 1e-6 * budget, "slackness");
            }
            let value = |x: &CVec| {
                let mut bf = inst.bf.clone();
                bf.precoders[k] = x.clone();
                f_tau(&inst, &bf, &inst.sur)
            };
            let best = value(&p);
            for i in 0..1000 {
                let mut q = if i % 2 == 0 {
                    complex_gaussian_vec(&mut r, p.len(), 1.0)
                } else {
                    &p + complex_gaussian_vec(&mut r, p.len(), 1e-2 * budget)
                };
                let n2 = q.norm_squared();
                let target = if i % 2 == 0 {
                    budget * r.random_range(0.0..1.0)
                } else {
                    n2.min(budget)
                };
                q *= C64::new((target / n2).sqrt(), 0.0);
                assert!(
                    value(&q) <= best + 1e-12 * (1.0 + best.abs()),
                    "probe beat the update for user {k}"
                );
            }
            let g = fd_gradient(&p, 1e-3 * budget.sqrt(), &value);
            let (_, b) = precoder_system(k, &inst.bf, &inst.eff, &inst.ch, &inst.sur, inst.sc.weights());
            let scale = 2.0 * b.norm() / LN_2;
            let resid = (&g - &p * C64::new(2.0 * mu / LN_2, 0.0)).norm();
            assert!(resid <= 1e-6 * scale, "kkt residual {resid} vs scale {scale}");
        }
    }
}

#[test]
fn bisection_hits_the_budget_when_unconstrained_solution_is_too_large() {
    let z = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(4.0, 0.0)]));
    let b = CVec::from_vec(vec![C64::new(3.0, 0.0), C64::new(0.0, 8.0)]);
    let params = BisectionParams {
        tol: 1e-12,
        max_iters: 200,
    };
    // Unconstrained solution (3, 2j) has power 13.
    let (p, mu) = solve_power_constrained(&z, &b, 20.0, params, 0).unwrap();
    assert_eq!(mu, 0.0);
    assert!((p[0] - C64::new(3.0, 0.0)).norm() < 1e-12 && (p[1] - C64::new(0.0, 2.0)).norm() < 1e-12);
    let (p, mu) = solve_power_constrained(&z, &b, 1.0, params, 0).unwrap();
    assert!((p.norm_squared() - 1.0).abs() < 1e-9);
    // Closed form: p_i = b_i / (z_i + μ).
    assert!((p[0] - C64::new(3.0 / (1.0 + mu), 0.0)).norm() < 1e-9);
    // Singular Z forces a positive multiplier.
    let (p, mu) = solve_power_constrained(&CMat::zeros(2, 2), &b, 2.0, params, 0).unwrap();
    assert!(mu > 0.0 && (p.norm_squared() - 2.0).abs() < 1e-9);
    assert!((p[1] / p[0] - b[1] / b[0]).norm() < 1e-9);
}

#[test]
fn combiner_update_is_optimal_and_normalization_preserves_value() {
    let mut r = rng(10);
    for seed in 0..20 {
        let inst = random_instance(&small_configs()[seed as usize % 3], 600 + seed);
        for k in 0..inst.sc.users() {
            let (unit, norm) = update_combiner(k, &inst.bf, &inst.eff, &inst.ch, &inst.sur, &inst.sc).unwrap();
            assert!((unit.norm() - 1.0).abs() < 1e-12);
            let raw = &unit * C64::new(norm, 0.0);
            let value = |x: &CVec| {
                let mut bf = inst.bf.clone();
                bf.combiners[k] = x.clone();
                f_tau(&inst, &bf, &inst.sur)
            };
            let best = value(&raw);
            for i in 0..1000 {
                let q = if i % 2 == 0 {
                    complex_gaussian_vec(&mut r, raw.len(), norm * norm)
                } else {
                    &raw + complex_gaussian_vec(&mut r, raw.len(), 1e-4 * norm * norm)
                };
                assert!(value(&q) <= best + 1e-12 * (1.0 + best.abs()));
            }
            let g = fd_gradient(&raw, 1e-3 * norm, &value);
            assert!(g.norm() * norm < 1e-6 * (1.0 + best.abs()), "gradient {}", g.norm());

            let mut bf = inst.bf.clone();
            bf.combiners[k] = unit;
            let mut sur = inst.sur.clone();
            sur.tau[k] *= norm;
            assert!(rel_close(f_tau(&inst, &bf, &sur), best, 1e-12));
        }
    }
}

#[test]
fn combiner_is_matched_filter_without_interference() {
    let cfg = unit_config(3, 2, RisArchitecture::fully_connected(4, Reciprocity::NonReciprocal));
    let inst = random_instance(&cfg, 5);
    let mut bf = inst.bf.clone();
    // Silence everything except the stream into user 0.
    for i in 1..3 {
        bf.precoders[i] = CVec::zeros(2);
    }
    let mut ch = inst.ch.clone();
    for h in ch.h_dir.iter_mut().flatten() {
        h.fill(C64::new(0.0, 0.0));
    }
    let xi = build_xi(0, &bf, &inst.eff, &ch, inst.sc.noise_w);
    let d = inst.eff.desired(0) * &bf.precoders[0];
    // Ξ = σ² I + d dᴴ, whose inverse maps d onto a multiple of d.
    let expected = CMat::identity(2, 2) * C64::new(inst.sc.noise_w, 0.0) + &d * d.adjoint();
    assert!((&xi - &expected).norm() < 1e-12 * expected.norm());
    let (w, _) = update_combiner(0, &bf, &inst.eff, &ch, &inst.sur, &inst.sc).unwrap();
    let cos = w.dotc(&d).norm() / d.norm();
    assert!((cos - 1.0).abs() < 1e-10);
}

fn configs_for_trace_form(
    arch: RisArchitecture,
    structural: bool,
    direct: bool,
    antennas: usize,
) -> circulator_core::ScenarioConfig {
    let mut cfg = unit_config(3, antennas, arch);
    cfg.structural_scattering = structural;
    cfg.direct_links = direct;
    cfg
}

#[test]
fn trace_form_reproduces_objective_differences() {
    let mut r = rng(11);
    for arch in architecture_classes(4) {
        for (structural, direct) in [(false, false), (true, false), (true, true), (false, true)] {
            let cfg = configs_for_trace_form(arch, structural, direct, 2);
            let inst = random_instance(&cfg, 700);
            let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
            let direct_value = |phi: &CMat| {
                let eff = effective_channels(&inst.ch, phi, structural).unwrap();
                eval_f_tau(&inst.bf, &eff, &inst.ch, &inst.sur, &inst.sc)
            };
            for _ in 0..25 {
                let p1 = random_feasible_phi(&inst.sc.config.ris, &mut r);
                let p2 = random_feasible_phi(&inst.sc.config.ris, &mut r);
                let d_direct = direct_value(&p1) - direct_value(&p2);
                let d_trace = coeffs.value(&p1) - coeffs.value(&p2);
                let f = direct_value(&p1).abs();
                assert!(
                    (d_direct - d_trace).abs() <= 1e-8 * (1.0 + f),
                    "{} s={structural} d={direct}",
                    arch.label()
                );
            }
        }
    }
}

#[test]
fn trace_form_coefficients_have_expected_structure() {
    let cfg = configs_for_trace_form(
        RisArchitecture::fully_connected(4, Reciprocity::NonReciprocal),
        true,
        true,
        2,
    );
    let inst = random_instance(&cfg, 701);
    let c = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
    for m in [&c.a, &c.b] {
        assert!((m - m.adjoint()).norm() <= 1e-12 * m.norm());
        let e = SymmetricEigen::new(hermitian_part(m));
        assert!(e.eigenvalues.iter().all(|&l| l >= -1e-10 * m.norm()));
    }
    assert!((&c.c3 - &c.b * &c.a).norm() <= 1e-12 * c.c3.norm());
    let phi = random_unitary(&mut rng(1), 4);
    let dense = circulator_core::scattering::pdd::kron_quadratic(&c, &phi);
    let trace = (&c.a * &phi * &c.b * phi.adjoint()).trace().re;
    assert!(rel_close(c.quadratic(&phi), dense, 1e-12));
    assert!(rel_close(c.quadratic(&phi), trace, 1e-12));

    let mut sur = inst.sur.clone();
    sur.tau.iter_mut().for_each(|t| *t = C64::new(0.0, 0.0));
    let z = assemble_trace_form(&inst.bf, &sur, &inst.ch, &inst.sc);
    for m in [&z.a, &z.c1, &z.c2, &z.c3, &z.c4] {
        assert_eq!(m.norm(), 0.0);
    }
    assert!(z.b.norm() > 0.0);

    let mut cfg_off = cfg.clone();
    cfg_off.structural_scattering = false;
    let sc_off = scenario(&cfg_off);
    assert_eq!(
        assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &sc_off).c3.norm(),
        0.0
    );
}

/// K = 1-term hand expansion at M = 2, N = 1: the desired-link term of user 0 alone.
#[test]
fn trace_form_hand_expansion_single_link() {
    let cfg = configs_for_trace_form(
        RisArchitecture::fully_connected(2, Reciprocity::NonReciprocal),
        false,
        false,
        1,
    );
    let inst = random_instance(&cfg, 702);
    let mut sur = inst.sur.clone();
    let mut bf = inst.bf.clone();
    for k in 1..3 {
        sur.tau[k] = C64::new(0.0, 0.0);
    }
    for i in [1usize, 2] {
        bf.precoders[i] = CVec::zeros(1);
    }
    let c = assemble_trace_form(&bf, &sur, &inst.ch, &inst.sc);
    // Only h_0ᵀ Φ h_2 p_0 survives: amplitude Σ_{ab} h0_a Φ_ab h2_b p w*.
    let alpha = inst.sc.weights()[0] / LN_2;
    let (h0, h2) = (inst.ch.h_ref[0].column(0), inst.ch.h_ref[2].column(0));
    let (p, w) = (bf.precoders[0][0], bf.combiners[0][0]);
    let t = sur.tau[0];
    let s = (1.0 + sur.iota[0]).sqrt();
    for a in 0..2 {
        for b in 0..2 {
            // Coefficient of Φ_ab in 2 Re Tr(CΦ) is 2 C_ba.
            let lin = alpha * s * t.conj() * w.conj() * h0[a] * h2[b] * p;
            assert!((c.c1[(b, a)] - lin).norm() <= 1e-12 * lin.norm().max(1e-300));
        }
    }
    let u = h0.map(|z| z.conj()) * w;
    let a_expected = &u * u.adjoint() * C64::new(alpha * t.norm_sqr(), 0.0);
    assert!((&c.a - a_expected).norm() <= 1e-12 * c.a.norm());
}

fn tight_params() -> PddParams {
    PddParams {
        inner_max: 200,
        outer_max: 2000,
        eps: 1e-11,
        rho0: 1.0,
        scale: 0.8,
        inner_tol: 1e-14,
        dual_tol0: 1e-3,
        dual_decay: 0.9,
    }
}

#[test]
fn scattering_update_beats_probes_and_is_stationary() {
    let mut r = rng(12);
    for (i, arch) in architecture_classes(4).into_iter().enumerate() {
        for seed in 0..3 {
            let mut cfg = configs_for_trace_form(arch, seed % 2 == 1, seed == 2, 2);
            cfg.seed = seed;
            let inst = random_instance(&cfg, 800 + 10 * i as u64 + seed);
            let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
            let maps = build_maps(&inst.sc.config.ris);
            let out = run_pdd(&coeffs, &maps, &inst.phi, &tight_params()).unwrap();
            let phi = out.phi;
            assert!(unitarity_error(&phi) <= 1e-10);
            if arch.is_reciprocal() {
                assert_eq!(phi, phi.transpose());
            }
            let best = coeffs.value(&phi);
            assert!(best >= coeffs.value(&inst.phi) - 1e-12);
            for j in 0..1000 {
                let probe = if j % 2 == 0 {
                    random_feasible_phi(&arch, &mut r)
                } else {
                    let s = random_direction(&arch, &mut r);
                    curve(&phi, &s, r.random_range(1e-3..0.3), arch.is_reciprocal())
                };
                assert!(
                    coeffs.value(&probe) <= best + 1e-10 * (1.0 + best.abs()),
                    "{} probe {j}",
                    arch.label()
                );
            }
            let scale = curvature_scale(&coeffs);
            let direct = |p: &CMat| {
                let eff = effective_channels(&inst.ch, p, inst.sc.structural()).unwrap();
                eval_f_tau(&inst.bf, &eff, &inst.ch, &inst.sur, &inst.sc)
            };
            for _ in 0..5 {
                let s = random_direction(&arch, &mut r);
                let s = &s / C64::new(s.norm(), 0.0);
                let h = 1e-4;
                let d = (direct(&curve(&phi, &s, h, arch.is_reciprocal()))
                    - direct(&curve(&phi, &s, -h, arch.is_reciprocal())))
                    / (2.0 * h);
                assert!(
                    d.abs() < 1e-6 * scale,
                    "{}: directional derivative {d:e}, scale {scale:e}",
                    arch.label()
                );
            }
        }
    }
}

#[test]
fn group_subproblem_is_the_objective_restricted_to_one_group() {
    let mut r = rng(13);
    for rec in [Reciprocity::NonReciprocal, Reciprocity::Reciprocal] {
        let arch = RisArchitecture::group_connected(4, 2, rec);
        let cfg = configs_for_trace_form(arch, true, true, 1);
        let inst = random_instance(&cfg, 900);
        let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
        let maps = build_maps(&arch);
        let mut st = RisState::from_phi(&inst.phi, &maps, 0.3);
        st.psi_groups = maps.split(&random_feasible_phi(&arch, &mut r));
        for l in st.lambda_groups.iter_mut() {
            let x = complex_gaussian(&mut r, 2, 2, 0.1);
            *l = if arch.is_reciprocal() { symmetrize(&x) } else { x };
        }
        for g in 0..2 {
            let sub = assemble_group_subproblem(g, &coeffs, &maps, &st);
            let model = |x: &CVec| x.dotc(&(&sub.delta_mat * x)).re - 2.0 * x.dotc(&sub.delta_vec).re;
            let lagrangian = |x: &CVec| {
                let mut s = st.clone();
                s.phi_groups[g] = maps.group.expand(x);
                augmented_lagrangian(&coeffs, &s)
            };
            let base = complex_gaussian_vec(&mut r, maps.group.free_len(), 1.0);
            let offset = model(&base) - lagrangian(&base);
            for _ in 0..100 {
                let x = complex_gaussian_vec(&mut r, maps.group.free_len(), 1.0);
                assert!((model(&x) - lagrangian(&x) - offset).abs() <= 1e-8 * (1.0 + lagrangian(&x).abs()));
            }
            // The other group enters δ only.
            let mut st2 = st.clone();
            st2.phi_groups[1 - g] = maps.split(&random_feasible_phi(&arch, &mut r))[1 - g].clone();
            let sub2 = assemble_group_subproblem(g, &coeffs, &maps, &st2);
            assert!((&sub2.delta_mat - &sub.delta_mat).norm() <= 1e-14 * sub.delta_mat.norm());
            assert!((&sub2.delta_vec - &sub.delta_vec).norm() > 1e-6 * sub.delta_vec.norm());
        }
    }
}

#[test]
fn fully_connected_model_without_proximal_term_recovers_unconstrained_maximizer() {
    let arch = RisArchitecture::fully_connected(2, Reciprocity::NonReciprocal);
    let cfg = configs_for_trace_form(arch, false, false, 1);
    // Two users on a 2-element surface keep A and B full rank.
    let mut cfg2 = cfg.clone();
    cfg2.users = 2;
    cfg2.user_angles_deg = vec![40.0, 120.0];
    cfg2.user_distances_m = vec![1.0; 2];
    cfg2.tx_power_dbm = vec![0.0; 2];
    cfg2.weights = vec![0.5; 2];
    let inst = random_instance(&cfg2, 901);
    let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
    let maps = build_maps(&arch);
    let st = RisState::from_phi(&inst.phi, &maps, 1e12);
    let sub = assemble_group_subproblem(0, &coeffs, &maps, &st);
    let x = sub.delta_mat.clone().lu().solve(&sub.delta_vec).unwrap();
    let phi = maps.group.expand(&x);
    // Stationarity of 2 Re Tr(CΦ) − Tr(AΦBΦᴴ): Cᴴ = A Φ B.
    let resid = (coeffs.linear().adjoint() - &coeffs.a * &phi * &coeffs.b).norm();
    assert!(resid <= 1e-6 * coeffs.linear().norm(), "residual {resid:e}");
}

#[test]
fn woodbury_solver_matches_dense_system() {
    let mut r = rng(14);
    for (m, mg, rec) in [(8, 8, false), (8, 8, true), (8, 4, false), (4, 2, true), (4, 1, false)] {
        let reciprocity = if rec {
            Reciprocity::Reciprocal
        } else {
            Reciprocity::NonReciprocal
        };
        let arch = RisArchitecture::group_connected(m, mg, reciprocity);
        let cfg = configs_for_trace_form(arch, true, false, 1);
        let inst = random_instance(&cfg, 902 + m as u64);
        let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
        let maps = build_maps(&arch);
        for rho in [1e-3, 0.7, 50.0] {
            let st = RisState::from_phi(&inst.phi, &maps, rho);
            for g in 0..maps.groups {
                let sub = assemble_group_subproblem(g, &coeffs, &maps, &st);
                let mut solver = GroupSolver::new(&maps.block(&coeffs.a, g), &maps.block(&coeffs.b, g), maps.group);
                solver.set_scale(1.0 / (2.0 * rho));
                let rhs = complex_gaussian_vec(&mut r, maps.group.free_len(), 1.0);
                let fast = solver.solve(&rhs);
                let resid = (&sub.delta_mat * &fast - &rhs).norm();
                assert!(
                    resid <= 1e-9 * rhs.norm(),
                    "m={m} mg={mg} rec={rec} rho={rho}: {resid:e}"
                );
            }
        }
    }
}

#[test]
fn phi_group_update_solves_the_linear_system() {
    let mut r = rng(15);
    let l = 6;
    let x = complex_gaussian(&mut r, l, l, 1.0);
    let delta = &x * x.adjoint() + CMat::identity(l, l) * C64::new(0.1, 0.0);
    let rhs = complex_gaussian_vec(&mut r, l, 1.0);
    let phi = update_phi_group(&delta, &rhs);
    assert!((&delta * &phi - &rhs).norm() <= 1e-9 * rhs.norm());
    assert_eq!(update_phi_group(&CMat::identity(3, 3), &CVec::zeros(3)), CVec::zeros(3));
    let diag = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(2.0, 0.0), C64::new(4.0, 0.0)]));
    let v = update_phi_group(&diag, &CVec::from_vec(vec![C64::new(1.0, 1.0), C64::new(2.0, 0.0)]));
    assert!((v[0] - C64::new(0.5, 0.5)).norm() < 1e-15 && (v[1] - C64::new(0.5, 0.0)).norm() < 1e-15);
    // Singular system goes through the ridge fallback and stays finite.
    let singular = CMat::from_element(2, 2, C64::new(1.0, 0.0));
    let v = update_phi_group(&singular, &CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]));
    assert!(v.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
}

#[test]
fn procrustes_projection_examples() {
    let mut r = rng(16);
    let zero = CMat::zeros(3, 3);
    let u = random_unitary(&mut r, 3);
    assert!((update_psi_group(&u, &zero, 0.5, false) - &u).norm() < 1e-12);
    let d = CMat::from_diagonal(&CVec::from_vec(vec![
        C64::new(2.0, 0.0),
        C64::new(0.0, -3.0),
        C64::new(-0.5, 0.0),
    ]));
    let expected = CMat::from_diagonal(&CVec::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
    ]));
    assert!((update_psi_group(&d, &zero, 0.5, false) - expected).norm() < 1e-12);
    for _ in 0..20 {
        let phi = complex_gaussian(&mut r, 4, 4, 1.0);
        let lam = complex_gaussian(&mut r, 4, 4, 1.0);
        let rho = r.random_range(0.01..2.0);
        let target = &lam * C64::new(rho, 0.0) + &phi;
        let psi = update_psi_group(&phi, &lam, rho, false);
        assert!(unitarity_error(&psi) < 1e-10);
        let dist = (&psi - &target).norm();
        for _ in 0..200 {
            assert!(dist <= (random_unitary(&mut r, 4) - &target).norm() + 1e-12);
        }
        let sym_target = symmetrize(&target);
        let psi_s = update_psi_group(&sym_target, &CMat::zeros(4, 4), rho, true);
        assert!(unitarity_error(&psi_s) < 1e-10);
        assert_eq!(psi_s, psi_s.transpose());
    }
}

#[test]
fn outer_update_branches() {
    let arch = RisArchitecture::fully_connected(2, Reciprocity::NonReciprocal);
    let maps = build_maps(&arch);
    let mut st = RisState::from_phi(&CMat::identity(2, 2), &maps, 1e-2);
    st.phi_groups[0][(0, 1)] = C64::new(0.5, 0.0);
    for _ in 0..5 {
        assert_eq!(pdd_outer_update(&mut st, 1e-3, 0.8).unwrap(), OuterBranch::Penalty);
    }
    assert!((st.rho - 1e-2 * 0.8f64.powi(5)).abs() < 1e-15);
    assert!((st.rho - 3.2768e-3).abs() < 1e-12);
    let before = st.lambda_groups[0].clone();
    assert_eq!(pdd_outer_update(&mut st, 1.0, 0.8).unwrap(), OuterBranch::Dual);
    let expected = before + (&st.phi_groups[0] - &st.psi_groups[0]) / C64::new(st.rho, 0.0);
    assert!((&st.lambda_groups[0] - expected).norm() < 1e-12);
    st.rho = 1.1e-12;
    assert!(matches!(
        pdd_outer_update(&mut st, 1e-3, 0.8),
        Err(Error::PenaltyRunaway { .. })
    ));
}

#[test]
fn augmented_lagrangian_never_increases_within_inner_loops() {
    for arch in architecture_classes(4) {
        let cfg = configs_for_trace_form(arch, true, true, 2);
        let inst = random_instance(&cfg, 903);
        let coeffs = assemble_trace_form(&inst.bf, &inst.sur, &inst.ch, &inst.sc);
        let out = run_pdd(
            &coeffs,
            &build_maps(&arch),
            &inst.phi,
            &PddParams::from(inst.sc.solver()),
        )
        .unwrap();
        for pair in out.trace.rows.windows(2) {
            if pair[0].outer_iter == pair[1].outer_iter {
                assert!(
                    pair[1].augmented_lagrangian <= pair[0].augmented_lagrangian + 1e-9,
                    "{}",
                    arch.label()
                );
            }
        }
        assert!(out.trace.converged, "{}", arch.label());
    }
}

#[test]
fn maps_round_trip_and_examples() {
    let mut r = rng(17);
    let k_r = circulator_core::scattering::GroupMap {
        group_size: 2,
        reciprocal: true,
    }
    .duplication_matrix();
    let expected = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(k_r, expected);
    let k_nr = circulator_core::scattering::GroupMap {
        group_size: 2,
        reciprocal: false,
    }
    .duplication_matrix();
    assert_eq!(k_nr, DMatrix::identity(4, 4));

    for arch in architecture_classes(4) {
        let maps = build_maps(&arch);
        let k = maps.duplication_matrix(0);
        for c in 0..k.ncols() {
            assert!(k.column(c).iter().any(|&x| x == 1.0));
        }
        for row in k.row_iter() {
            assert!(row.iter().filter(|&&x| x == 1.0).count() <= 1);
        }
        let phi = random_feasible_phi(&arch, &mut r);
        let blocks = maps.split(&phi);
        let mut acc = DMatrix::<C64>::zeros(16, 1);
        for (g, b) in blocks.iter().enumerate() {
            let free = maps.group.extract(b);
            assert_eq!(&maps.group.expand(&free), b);
            let rg = maps.placement_matrix(g).map(|x| C64::new(x, 0.0));
            let kg = maps.duplication_matrix(g).map(|x| C64::new(x, 0.0));
            acc += rg * kg * DMatrix::from_column_slice(free.len(), 1, free.as_slice());
        }
        assert_eq!(acc.as_slice(), phi.as_slice());
    }
}

#[test]
fn precoder_quadratic_matches_objective() {
    // `f_τ` restricted to `p_k` is `(2 Re bᴴp − pᴴZp)/ln 2` plus a constant.
    let mut r = rng(18);
    let inst = random_instance(&small_configs()[2], 904);
    for k in 0..3 {
        let (z, b) = precoder_system(k, &inst.bf, &inst.eff, &inst.ch, &inst.sur, inst.sc.weights());
        let value = |x: &CVec| {
            let mut bf = inst.bf.clone();
            bf.precoders[k] = x.clone();
            f_tau(&inst, &bf, &inst.sur)
        };
        let model = |x: &CVec| (2.0 * b.dotc(x).re - x.dotc(&(&z * x)).re) / LN_2;
        let x0 = complex_gaussian_vec(&mut r, 2, 1e-3);
        for _ in 0..20 {
            let x = complex_gaussian_vec(&mut r, 2, 1e-3);
            let lhs = value(&x) - value(&x0);
            let rhs = model(&x) - model(&x0);
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + value(&x).abs()));
        }
    }
}
