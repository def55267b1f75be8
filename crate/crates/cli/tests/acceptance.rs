//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` are run at full tolerance and reported
//! as failures. They do not fail the target, but an unexpected pass does, so
//! the list cannot go stale.

use std::path::Path;
use std::time::Instant;

use hamlearn_cli::app::read_trace;
use hamlearn_cli::output::{median, write_table, Stamp};
use hamlearn_cli::{RunConfig, UnitMap};
use hamlearn_core::protocol::SaturationSettings;
use hamlearn_core::rng::{stream, Purpose};
use hamlearn_core::*;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

const SEEDS: u64 = 100;
const EXPECTED_FAIL: [&str; 4] = ["C2", "C3", "C4", "C5"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, pass, detail }
}

fn loss_at(log: &RunLog, k: usize) -> f64 {
    log.steps.get(k).map_or(log.last_summary(), |s| &s.summary).quadratic_loss.unwrap()
}

fn final_loss(log: &RunLog) -> f64 {
    log.last_summary().quadratic_loss.unwrap()
}

fn within_3sd(log: &RunLog, truth: &ParameterVector) -> bool {
    let e = &log.final_estimate;
    let ok_w = (e.mean.omega - truth.omega).abs() <= 3.0 * e.sd.omega;
    let ok_a = !log.config.model.is_chirped() || (e.mean.alpha - truth.alpha).abs() <= 3.0 * e.sd.alpha;
    ok_w && ok_a
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn nv_reference(model: ModelDescriptor, seed: u64) -> ProtocolConfig {
    RunConfig::nv_reference(seed).protocol(model).unwrap()
}

fn omega0() -> f64 {
    RunConfig::nv_reference(0).truth().omega
}

struct Paired {
    qle: Vec<RunLog>,
    iqle: Vec<RunLog>,
    qle_seconds: f64,
}

fn paired_runs() -> Paired {
    let sys = TrueSystem::ideal(ParameterVector::rabi(omega0()), 10_000).unwrap();
    let truth = Some(sys.true_params);
    let t = Instant::now();
    let qle: Vec<RunLog> = (0..SEEDS)
        .into_par_iter()
        .map(|s| run_qle(&nv_reference(ModelDescriptor::RABI, s), DataSource::System(&sys), truth).unwrap())
        .collect();
    let qle_seconds = t.elapsed().as_secs_f64();
    let iqle = (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            let cfg = nv_reference(ModelDescriptor::RABI, s);
            run_iqle(&cfg, DataSource::System(&sys), truth, XMinusPolicy::Posterior).unwrap()
        })
        .collect();
    Paired { qle, iqle, qle_seconds }
}

fn improvement_runs(alpha: f64) -> Vec<ImprovementReport> {
    let sys = TrueSystem::ideal(ParameterVector::chirped(omega0(), alpha), 10_000).unwrap();
    (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            model_improvement_workflow(
                &nv_reference(ModelDescriptor::RABI, s),
                &nv_reference(ModelDescriptor::CHIRPED_RABI, s),
                &sys,
                SaturationSettings::default(),
            )
            .unwrap()
        })
        .collect()
}

fn c1(p: &Paired) -> Outcome {
    let m5 = median(&p.qle.iter().map(|l| loss_at(l, 4)).collect::<Vec<_>>());
    let m50 = median(&p.qle.iter().map(final_loss).collect::<Vec<_>>());
    let ratio = m5 / m50;
    let pass = m50 <= 1e-4 && ratio >= 100.0 && p.qle_seconds <= 60.0;
    outcome(
        "C1",
        "QLE convergence",
        pass,
        format!(
            "median final loss {m50:.3e} (<= 1e-4), step 5 -> 50 decrease {ratio:.0}x (>= 100x), sweep {:.1} s (<= 60 s)",
            p.qle_seconds
        ),
    )
}

fn c2(p: &Paired) -> Outcome {
    let iq50 = median(&p.iqle.iter().map(final_loss).collect::<Vec<_>>());
    let q50 = median(&p.qle.iter().map(final_loss).collect::<Vec<_>>());
    let steps: Vec<f64> = (5..=50).map(|k| k as f64).collect();
    let log_med: Vec<f64> = (5..=50)
        .map(|k| median(&p.iqle.iter().map(|l| loss_at(l, k - 1)).collect::<Vec<_>>()).ln())
        .collect();
    let slope = ols_slope(&steps, &log_med);
    let failed = p.iqle.iter().filter(|l| !l.is_complete()).count();
    let pass = iq50 <= 1e-5 && iq50 <= q50 && slope < 0.0;
    outcome(
        "C2",
        "IQLE outperforms QLE and converges",
        pass,
        format!(
            "median final loss {iq50:.3e} (<= 1e-5), paired QLE median {q50:.3e}, ln-loss slope {slope:.4}/step (< 0), {failed} runs stopped degenerate"
        ),
    )
}

fn c3(chirped: &[ImprovementReport]) -> Outcome {
    let fired = chirped.iter().filter(|r| r.saturation.fired()).count();
    let plateau = median(&chirped.iter().map(|r| r.saturation.final_variance).collect::<Vec<_>>());
    let norm2 = median(&chirped.iter().map(|r| r.model_two.last_summary().covariance_norm).collect::<Vec<_>>());
    let pass = fired >= 90 && norm2 * 5.0 <= plateau;
    outcome(
        "C3",
        "saturation under model mismatch",
        pass,
        format!(
            "Model I saturation fired {fired}/100 (>= 90); Model II median ||Sigma||_2 {norm2:.3e} vs Model I plateau {plateau:.3e} (need <= {:.3e})",
            plateau / 5.0
        ),
    )
}

fn c4(chirped: &[ImprovementReport], plain: &[ImprovementReport]) -> Outcome {
    let big = chirped.iter().filter(|r| r.comparison.bayes_factor > 10.0).count();
    let med_chirped = median(&chirped.iter().map(|r| r.comparison.log_bayes_factor).collect::<Vec<_>>());
    let med_plain = median(&plain.iter().map(|r| r.comparison.bayes_factor).collect::<Vec<_>>());
    let pass = big >= 90 && med_plain <= 3.0;
    outcome(
        "C4",
        "Bayes factor direction",
        pass,
        format!(
            "chirped traces K > 10 in {big}/100 (>= 90, median ln K {med_chirped:.2}); unchirped median K {med_plain:.3e} (<= 3)"
        ),
    )
}

fn c5(p: &Paired, chirped: &[ImprovementReport]) -> Outcome {
    let w0 = ParameterVector::rabi(omega0());
    let q = p.qle.iter().filter(|l| within_3sd(l, &w0)).count();
    let i = p.iqle.iter().filter(|l| within_3sd(l, &w0)).count();
    let truth2 = ParameterVector::chirped(omega0(), UnitMap::default().alpha(-0.28));
    let m2 = chirped.iter().filter(|r| within_3sd(&r.model_two, &truth2)).count();
    let pass = q >= 95 && i >= 95 && m2 >= 95;
    outcome(
        "C5",
        "parameter recovery calibration",
        pass,
        format!("within 3 sd: QLE {q}/100, IQLE {i}/100, Model II {m2}/100 (each >= 95)"),
    )
}

type M2 = [[Complex64; 2]; 2];

fn matmul(a: &M2, b: &M2) -> M2 {
    let z = Complex64::new(0.0, 0.0);
    let mut o = [[z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

fn random_unitary<R: Rng>(rng: &mut R) -> M2 {
    let z = Complex64::new(0.0, 0.0);
    let mut angle = || rng.random_range(0.0..std::f64::consts::TAU);
    let rz = |t: f64| [[Complex64::from_polar(1.0, -t / 2.0), z], [z, Complex64::from_polar(1.0, t / 2.0)]];
    let rx = |t: f64| {
        let (c, s) = (Complex64::new((t / 2.0).cos(), 0.0), Complex64::new(0.0, -(t / 2.0).sin()));
        [[c, s], [s, c]]
    };
    let (a, b, c, g) = (angle(), angle(), angle(), angle());
    let phase = Complex64::from_polar(1.0, g);
    let m = matmul(&matmul(&rz(a), &rx(b)), &rz(c));
    m.map(|row| row.map(|x| x * phase))
}

fn c6() -> Outcome {
    let mut rng = stream(601, Purpose::Prior, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (u, v, w) = (random_unitary(&mut rng), random_unitary(&mut rng), random_unitary(&mut rng));
        let psi = [w[0][0], w[1][0]];
        let ua = [u[0][0] * psi[0] + u[0][1] * psi[1], u[1][0] * psi[0] + u[1][1] * psi[1]];
        let va = [v[0][0] * psi[0] + v[0][1] * psi[1], v[1][0] * psi[0] + v[1][1] * psi[1]];
        let oracle = (ua[0].conj() * va[0] + ua[1].conj() * va[1]).norm_sqr();
        let est = estimate_likelihood(&Unitary2(u), &Unitary2(v), &QubitState(psi), ShotBudget::Exact, &mut rng);
        worst = worst.max((est.value - oracle).abs());
    }
    let rms = |shots: u64| {
        let v = Unitary2::x_rotation(Phase(std::f64::consts::FRAC_PI_2));
        let mut rng = stream(602, Purpose::Channel, shots, 0);
        let n = 4000;
        let s: f64 = (0..n)
            .map(|_| {
                let e = estimate_likelihood(&Unitary2::identity(), &v, &QubitState::ground(), ShotBudget::PerBasis(shots), &mut rng);
                (e.value - 0.5).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    };
    let r: Vec<f64> = [250, 1000, 4000].iter().map(|&s| rms(s)).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let scaling_ok = ratios.iter().all(|x| (x - 2.0).abs() <= 0.6);
    outcome(
        "C6",
        "channel fidelity",
        worst <= 1e-12 && scaling_ok,
        format!(
            "EXACT vs oracle max error {worst:.1e} (<= 1e-12); RMS halving per 4x shots {:.3}, {:.3} (2 +- 30%)",
            ratios[0], ratios[1]
        ),
    )
}

fn c7() -> Outcome {
    // Exact grid Bayes.
    let grid = [0.15, 0.45, 0.9];
    let script = [(1.0, Datum::Survived), (4.0, Datum::Flipped), (2.5, Datum::Flipped), (7.0, Datum::Survived), (0.3, Datum::Survived)];
    let pos: Vec<_> = grid.iter().map(|&w| ParameterVector::rabi(w)).collect();
    let mut ens = ParticleEnsemble::uniform(pos.clone(), 1).unwrap();
    let mut brute = [1.0f64; 3];
    let mut grid_err: f64 = 0.0;
    for &(tau, d) in &script {
        let ls: Vec<f64> = pos.iter().map(|x| exact_likelihood_qle(ModelDescriptor::RABI, x, tau)).collect();
        ens.update(&ls, d).unwrap();
        for (b, &w) in brute.iter_mut().zip(&grid) {
            let p = (w * tau / 2.0).cos().powi(2);
            *b *= if d == Datum::Survived { p } else { 1.0 - p };
        }
        let z: f64 = brute.iter().sum();
        for (w, b) in ens.weights().iter().zip(&brute) {
            grid_err = grid_err.max((w - b / z).abs());
        }
    }

    // Liu-West moments.
    let n = 100_000;
    let mut rng = stream(701, Purpose::Prior, 0, 0);
    let positions: Vec<_> = (0..n)
        .map(|_| {
            let w: f64 = rng.random_range(0.0..1.0);
            ParameterVector::chirped(w, -0.5 * w + rng.random_range(-0.2..0.2))
        })
        .collect();
    let weights: Vec<f64> = positions.iter().map(|x| 1.0 + (6.0 * x.omega).sin().powi(2)).collect();
    let before = ParticleEnsemble::new(positions, weights, 2).unwrap();
    let after = liu_west_resample(&before, 0.98, None, &mut stream(701, Purpose::Resample, 0, 0)).unwrap();
    let (s0, s1) = (summarize(&before, None), summarize(&after, None));
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let lw = [
        (s1.mean.omega - s0.mean.omega).abs() / s0.covariance.omega_omega.sqrt(),
        (s1.mean.alpha - s0.mean.alpha).abs() / s0.covariance.alpha_alpha.sqrt(),
        rel(s1.covariance.omega_omega, s0.covariance.omega_omega),
        rel(s1.covariance.omega_alpha, s0.covariance.omega_alpha),
        rel(s1.covariance.alpha_alpha, s0.covariance.alpha_alpha),
    ];
    let lw_worst = lw.iter().cloned().fold(0.0, f64::max);

    // Randomised invariants, 1000 cases each.
    let mut rng = stream(702, Purpose::Prior, 0, 0);
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..40);
        let pos: Vec<_> = (0..k).map(|_| ParameterVector::rabi(rng.random_range(0.0..1.0))).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut e = ParticleEnsemble::new(pos, w, 1).unwrap();
        let ls: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
        let d = if rng.random_bool(0.5) { Datum::Survived } else { Datum::Flipped };
        e.update(&ls, d).unwrap();
        let sum: f64 = e.weights().iter().sum();
        let ess = effective_sample_size(&e);
        if (sum - 1.0).abs() > 1e-12 || !(1.0 - 1e-9..=k as f64 + 1e-9).contains(&ess) {
            violations += 1;
        }
        let (w, a, t) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..100.0));
        let u = propagator(w, a, t);
        if (u.adjoint() * u).max_abs_diff(&Unitary2::identity()) > 1e-12 {
            violations += 1;
        }
    }
    let pass = grid_err <= 1e-12 && lw_worst <= 0.05 && violations == 0;
    outcome(
        "C7",
        "inference micro-oracles",
        pass,
        format!(
            "grid Bayes max error {grid_err:.1e} (<= 1e-12); Liu-West worst moment deviation {:.2}% (<= 5%); {violations} invariant violations in 3000 random cases",
            lw_worst * 100.0
        ),
    )
}

fn table_bytes(log: &RunLog, stamp: &Stamp) -> Vec<u8> {
    let mut buf = Vec::new();
    write_table(&mut buf, stamp, log).unwrap();
    buf
}

fn c8() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let cfg = RunConfig::load(&fixtures.join("golden.toml")).unwrap();
    let stamp = Stamp::new(cfg.hash());
    let sys = cfg.system().unwrap();
    let pc = cfg.protocol(ModelDescriptor::RABI).unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| table_bytes(&run_qle(&pc, DataSource::System(&sys), Some(sys.true_params)).unwrap(), &stamp))
        .collect();
    let identical = runs[0] == runs[1];
    let mut golden_ok = true;
    for (kind, interactive) in [("qle", false), ("iqle", true)] {
        let trace = read_trace(&fixtures.join(format!("golden_{kind}.trace.jsonl"))).unwrap();
        let truth = trace.header.true_params;
        let log = if interactive {
            run_iqle(&pc, DataSource::Replay(&trace), truth, XMinusPolicy::Posterior).unwrap()
        } else {
            run_qle(&pc, DataSource::Replay(&trace), truth).unwrap()
        };
        let want = std::fs::read(fixtures.join(format!("golden_{kind}_replay.csv"))).unwrap();
        golden_ok &= table_bytes(&log, &stamp) == want;
    }
    outcome(
        "C8",
        "determinism",
        identical && golden_ok,
        format!("repeat run byte-identical: {identical}; golden replays byte-identical: {golden_ok}"),
    )
}

fn main() {
    let t = Instant::now();
    let paired = paired_runs();
    let chirped = improvement_runs(UnitMap::default().alpha(-0.28));
    let plain = improvement_runs(0.0);
    let outcomes = vec![
        c1(&paired),
        c2(&paired),
        c3(&chirped),
        c4(&chirped, &plain),
        c5(&paired, &chirped),
        c6(),
        c7(),
        c8(),
    ];
    println!();
    let mut unexpected = 0;
    for o in &outcomes {
        let expected_fail = EXPECTED_FAIL.contains(&o.id);
        let tag = match (o.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
            (true, true) => {
                unexpected += 1;
                "PASS (unexpected, update EXPECTED_FAIL)"
            }
        };
        println!("{} {:<36} {tag}: {}", o.id, o.title, o.detail);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass, {} fail, {:.1} s",
        outcomes.len(),
        outcomes.len() - passed,
        t.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
