//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thetagk::cylinder::{Collocation, SeededLaw};
use thetagk::gauss_kuzmin::joint_with;
use thetagk::*;
use thetagk_cli::{contraction_battery, run, Command, ExperimentConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let secs = t.elapsed().as_secs_f64();
    let pass = o.pass && secs < limit_s;
    println!(
        "criterion {id} {:<4} {name}: {} [{secs:.2}s, limit {limit_s}s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn bounds_table_rows() -> Outcome {
    let printed = [
        (1, 0.381966, 0.50000),
        (2, 0.267949192, 1.0 / 3.0),
        (3, 0.208711948, 0.25),
        (10, 0.083920216, 1.0 / 11.0),
        (100, 0.009804864, 0.00990099),
        (1000, 0.000998004, 0.000999),
        (10000, 0.00009998, 0.00009999),
    ];
    let cfg = ExperimentConfig::new(Command::BoundsTable);
    let art = run(&cfg).expect("bounds-table runs");
    let mut worst = 0.0f64;
    let mut pass = art.rows.len() == printed.len();
    for (row, (m, lo, up)) in art.rows.iter().zip(printed) {
        pass &= row[0].as_u64() == Some(m);
        let d = (row[2].as_f64().unwrap() - lo)
            .abs()
            .max((row[3].as_f64().unwrap() - up).abs());
        worst = worst.max(d);
    }
    pass &= worst <= 1e-6;
    Outcome {
        pass,
        detail: format!(
            "{} rows, max deviation from printed digits {worst:.2e} (tol 1e-6)",
            art.rows.len()
        ),
    }
}

fn sandwich() -> Outcome {
    let mut pass = true;
    let mut worst_slack_share = 0.0f64;
    let mut failures = Vec::new();
    for m in [1, 2, 3] {
        let p = ThetaParams::new(m).unwrap();
        for n in 1..=5 {
            let r = sandwich_check(&p, n, &[0.0, p.theta / 2.0, p.theta], 65).unwrap();
            let share = r.slack / (r.upper - r.lower);
            worst_slack_share = worst_slack_share.max(share);
            if !r.pass || share > 0.1 {
                pass = false;
                failures.push(format!("m={m} n={n}"));
            }
            if m == 2 && n == 1 {
                pass &= (r.lower - 0.125).abs() < 1e-7 && (r.upper - 0.33333).abs() < 1e-5;
            }
            if m == 2 && n == 2 {
                pass &= (r.lower - 0.0340909).abs() < 1e-7 && (r.upper - 0.111111).abs() < 1e-6;
            }
        }
    }
    Outcome {
        pass,
        detail: format!(
            "45 (m, n, a) cases inside their windows, largest slack/width {worst_slack_share:.2e} (limit 0.1){}",
            if failures.is_empty() { String::new() } else { format!(", failing {failures:?}") }
        ),
    }
}

fn contraction() -> Outcome {
    let p = ThetaParams::new(2).unwrap();
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for (name, f) in contraction_battery(&p, 1024, 42).unwrap() {
        let r = contraction_report(&p, &f, 6, 4000).unwrap();
        pass &= r.all_pass;
        for k in 1..=6 {
            if r.bounds[k] > 0.0 {
                worst_ratio =
                    worst_ratio.max(r.variations[k].max(r.sup_deviations[k]) / r.bounds[k]);
            }
        }
        if !r.all_pass {
            println!("    {name} exceeds var f/3^n");
        }
    }
    Outcome {
        pass,
        detail: format!("4 functions, n <= 6, largest value/bound {worst_ratio:.3}"),
    }
}

fn eigen_residuals() -> Outcome {
    let p = ThetaParams::new(2).unwrap();
    let th = p.theta;
    let f1 = |x: f64| (th * x).ln_1p();
    let pts: Vec<f64> = (0..=32).map(|k| th * k as f64 / 32.0).collect();
    let line = |i_max: u64| {
        pts.iter()
            .map(|&x| (gk1d_series(&p, f1, x, i_max).unwrap() - f1(x)).abs())
            .fold(0.0, f64::max)
    };
    // sup|F'| θ / (θ² I) with F' ≤ θ
    let line_bound = |i_max: u64| th * th / (th * th * i_max as f64);
    let grid16: Vec<f64> = (1..=16).map(|k| th * k as f64 / 16.0).collect();
    let rects: Vec<Rect> = grid16
        .iter()
        .flat_map(|&x| grid16.iter().map(move |&y| (x, y)))
        .map(|(x, y)| Rect::new(&p, x, y).unwrap())
        .collect();
    let (r1, r2) = (line(100_000), line(200_000));
    let (b1, b2) = (line_bound(100_000), line_bound(200_000));
    let q1 = gk2d_fixed_point_residual(&p, &rects, 100_000).unwrap();
    let q2 = gk2d_fixed_point_residual(&p, &rects, 200_000).unwrap();
    let halves = |a: f64, b: f64| (a / b - 2.0).abs() < 0.05;
    let pass = r1 <= b1
        && r2 <= b2
        && b1 <= 5e-4
        && q1.residual <= q1.tail_bound
        && q2.residual <= q2.tail_bound
        && q1.tail_bound <= 5e-4
        && halves(r1, r2)
        && halves(q1.residual, q2.residual);
    Outcome {
        pass,
        detail: format!(
            "1-D {r1:.3e} <= {b1:.3e}, ratio {:.3}; 2-D {:.3e} <= {:.3e}, ratio {:.3}",
            r1 / r2,
            q1.residual,
            q1.tail_bound,
            q1.residual / q2.residual
        ),
    }
}

fn one_dimensional_decay() -> Outcome {
    let p = ThetaParams::new(2).unwrap();
    let r = decay_estimate(&p, 8, 4096).unwrap();
    let d: Vec<f64> = r.deviations.iter().map(|d| d.sup_deviation).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let bounded = r.deviations.iter().all(|d| d.sup_deviation <= d.bound);
    Outcome {
        pass: decreasing && bounded && r.fitted_rate < p.theta,
        detail: format!(
            "sup|F_n - G| from {:.3e} (n=0) to {:.3e} (n=8), decreasing {decreasing}, bounded {bounded}, rate {:.4} < {:.4}",
            d[0], d[8], r.fitted_rate, p.theta
        ),
    }
}

fn two_dimensional_decay() -> Outcome {
    let p = ThetaParams::new(2).unwrap();
    let rect = Rect::new(&p, 0.5, 0.5).unwrap();
    let limit = 1.25f64.ln() / 1.5f64.ln();
    let mut devs = Vec::new();
    let mut agree = true;
    let mut worst_z = 0.0f64;
    for n in [2, 4, 6, 8] {
        let ex = fbar_exact(&p, n, rect).unwrap();
        devs.push((ex.estimate - limit).abs());
        let mc = fbar_mc(&p, n, rect, 1_000_000, 42).unwrap();
        let z = (ex.estimate - mc.estimate).abs() / mc.std_error;
        worst_z = worst_z.max(z);
        agree &= z <= 4.0;
    }
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: decreasing && devs[2] <= 0.01 && agree,
        detail: format!(
            "|F_n - limit| at n=2,4,6,8: {:.2e} {:.2e} {:.2e} {:.2e}; Monte Carlo within {worst_z:.2} SE",
            devs[0], devs[1], devs[2], devs[3]
        ),
    }
}

fn convergent_bound() -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    for m in [1, 2, 3] {
        let p = ThetaParams::new(m).unwrap();
        let t2 = p.theta * p.theta;
        let mut rng = ChaCha8Rng::seed_from_u64(m);
        for _ in 0..1000 {
            let x = p.theta * rng.random::<f64>();
            let seq = expand_digits(&p, x, 21).unwrap();
            let c = convergents(&p, &seq.digits).unwrap();
            for n in 1..=20.min(c.len().saturating_sub(1)) {
                let err = (x - c[n - 1].value()).abs();
                let first = 1.0 / (c[n - 1].q * c[n].q);
                let second = (1.0 + t2).powi(-2 * (n as i32 / 2)) / t2;
                pass &= err <= first + 1e-12 && first <= second + 1e-12;
                checked += 1;
            }
        }
    }
    Outcome {
        pass,
        detail: format!("{checked} (x, n) pairs for m = 1, 2, 3"),
    }
}

fn closed_forms() -> Outcome {
    let mut worst_q = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut worst_spread = 0.0f64;
    for m in [1, 2, 3, 10, 100] {
        let p = ThetaParams::new(m).unwrap();
        for n in 0..=30 {
            let r = q_recurrence(&p, n);
            worst_q = worst_q.max((q_closed_form(&p, n).unwrap() - r).abs() / r);
        }
        let ratios: Vec<f64> = (1..=30)
            .map(|n| p_mn_closed(&p, n).unwrap().ratio)
            .collect();
        for r in &ratios {
            worst_ratio = worst_ratio.max((r - p.theta).abs());
            worst_spread = worst_spread.max((r - ratios[0]).abs());
        }
    }
    Outcome {
        pass: worst_q <= 1e-10 && worst_ratio <= 1e-9 && worst_spread <= 1e-9,
        detail: format!(
            "q relative gap {worst_q:.2e}; closed/product ratio spread {worst_spread:.2e}, distance to theta {worst_ratio:.2e}"
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    let p = ThetaParams::new(2).unwrap();
    let th = p.theta;
    let grid = 4096;
    let start = |n: usize| GridFunction::from_fn(&p, n, |x| x / th).unwrap();
    let fine = gk1d_iterate(&p, start(grid), 4, None).unwrap();
    let coarse = gk1d_iterate(&p, start(grid / 2), 4, None).unwrap();
    let mut pass = true;
    let mut worst_share = 0.0f64;
    for n in 1..=4 {
        let allowance = fine[n]
            .nodes()
            .zip(&fine[n].values)
            .fold(0.0f64, |a, (x, v)| a.max((v - coarse[n].eval(x)).abs()));
        for k in (0..=grid).step_by(grid / 32) {
            let x = fine[n].node(k);
            let o = fn_oracle(&p, n, x).unwrap();
            let gap = (o.value - fine[n].values[k]).abs();
            let budget = o.error + allowance;
            worst_share = worst_share.max(gap / budget);
            pass &= gap <= budget;
        }
    }
    // γ_a(T^n ≤ x) by iterating the one-dimensional equation from G_a
    let fine_grid = 16384;
    let mut worst_marginal = 0.0f64;
    let colloc = Collocation::with_defaults(&p);
    for a in [0.0, th / 2.0, th] {
        let g_a = GridFunction::from_fn(&p, fine_grid, |x| gamma_a_cdf(&p, a, x).unwrap()).unwrap();
        let it = gk1d_iterate(&p, g_a, 4, None).unwrap();
        for (n, f) in it.iter().enumerate().skip(1) {
            let law = SeededLaw::new(&colloc, a, n);
            for k in (0..=fine_grid).step_by(fine_grid / 32) {
                let x = f.node(k);
                let j = joint_with(&p, &law, n, x, th).unwrap();
                worst_marginal = worst_marginal.max((j.value - f.values[k]).abs());
            }
        }
    }
    pass &= worst_marginal <= 1e-7;
    Outcome {
        pass,
        detail: format!(
            "F_n gap at most {worst_share:.2} of the combined bound; joint at y = theta vs marginal {worst_marginal:.2e} (tol 1e-7)"
        ),
    }
}

fn main() {
    let results = [
        check(1, "bounds table", 1.0, bounds_table_rows),
        check(2, "sandwich", 60.0, sandwich),
        check(3, "contraction", 10.0, contraction),
        check(4, "eigenfunction residuals", 10.0, eigen_residuals),
        check(5, "one-dimensional decay", 10.0, one_dimensional_decay),
        check(6, "two-dimensional decay", 60.0, two_dimensional_decay),
        check(7, "convergent bound", 5.0, convergent_bound),
        check(8, "closed forms", 1.0, closed_forms),
        check(9, "oracle equivalence", 30.0, oracle_equivalence),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!(
        "{} of {} criteria pass",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
