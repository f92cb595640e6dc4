//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use price_coupling::gep::{solve_gep_anticipative, solve_gep_price_taking};
use price_coupling::verifier::same_point;
use price_coupling::{
    build_gep_game, catalog, check_e1, check_e2_consistent, check_t, check_tm,
    construct_sum_potential, construct_tm_potential, enumerate_equilibria, member_f1, member_f2,
    parse_input, solve_e1, solve_e2_consistent, solve_tm, verify_potential, ActionBox,
    EquilibriumKind, Expr, Formulation, Game, GepScenario, Input, PlayerSpec, PriceProblem,
    PriceRule, PriceSet, SharedTerm, SolverConfig, Tolerances, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res = Result<Outcome, Box<dyn std::error::Error>>;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized result records, compared across reruns.
    records: String,
}

fn outcome(pass: bool, detail: impl Into<String>, records: String) -> Res {
    Ok(Outcome {
        pass,
        detail: detail.into(),
        records,
    })
}

fn e(s: &str) -> Expr {
    Expr::parse(s).unwrap_or_else(|err| panic!("{s}: {err}"))
}

// ---------------------------------------------------------------------------
// Seeded random instances

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Shared {
    /// `gamma * p * S`, `S` the sum of every coordinate.
    Total,
    /// `gamma * p * (sum of own coordinates)`.
    Own,
    Zero,
}

#[derive(Clone, Debug)]
struct PriceSpec {
    closed: bool,
    /// Target `alpha - beta * S`.
    alpha: f64,
    beta: f64,
    /// Weight of the squared tracking error and the linear price term.
    a: f64,
    kappa: f64,
    /// `f` also carries `- p * S` (the linear-price family).
    minus_ps: bool,
    lo: f64,
    hi: f64,
    pts: usize,
    /// `M(x) = [lo, min(hi, c0 + nu * S)]`.
    c0: f64,
    nu: f64,
}

#[derive(Clone, Debug)]
struct Spec {
    dims: Vec<usize>,
    pts: Vec<usize>,
    upper: f64,
    /// Per player and coordinate: `a x^2 + b x`, plus `c x_1 x_2` for two coordinates.
    quad: Vec<Vec<(f64, f64)>>,
    cross: Vec<f64>,
    /// Per player, optional `x_1 + x_2 <= t`.
    cut: Vec<Option<f64>>,
    shared: Shared,
    gamma: f64,
    price: PriceSpec,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.gen_range(0..xs.len())]
}

impl Spec {
    fn random(rng: &mut ChaCha8Rng, max_players: usize, shared: Shared, closed: bool, max_joint: u64) -> Spec {
        let n = rng.gen_range(1..=max_players);
        let upper = pick(rng, &[1.0, 2.0, 4.0]);
        let mut dims = Vec::new();
        let mut pts = Vec::new();
        loop {
            dims.clear();
            pts.clear();
            for _ in 0..n {
                dims.push(rng.gen_range(1..=2));
                pts.push(pick(rng, &[3, 5, 7, 9, 11, 13, 17, 21]));
            }
            let joint: u64 = dims.iter().zip(&pts).map(|(&d, &k)| (k as u64).pow(d as u32)).product();
            if joint <= max_joint {
                break;
            }
        }
        let quad = dims
            .iter()
            .map(|&d| {
                (0..d)
                    .map(|_| {
                        (
                            pick(rng, &[-2.0, -1.5, -1.0, -0.5, 0.0, 0.5]),
                            pick(rng, &[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]),
                        )
                    })
                    .collect()
            })
            .collect();
        let cross = dims.iter().map(|_| pick(rng, &[-1.0, -0.5, 0.0, 0.5])).collect();
        let cut = dims
            .iter()
            .map(|&d| (d == 2 && rng.gen_bool(0.3)).then(|| upper * pick(rng, &[0.75, 1.0, 1.5])))
            .collect();
        let price = PriceSpec {
            closed,
            alpha: pick(rng, &[2.0, 4.0, 6.0, 8.0]),
            beta: pick(rng, &[0.5, 1.0, 2.0]),
            a: pick(rng, &[0.5, 1.0, 2.0]),
            kappa: pick(rng, &[-1.0, 0.0, 0.5]),
            minus_ps: false,
            lo: 0.0,
            hi: pick(rng, &[4.0, 8.0]),
            pts: pick(rng, &[2, 3, 5, 9]),
            c0: pick(rng, &[1.0, 2.0, 8.0]),
            nu: pick(rng, &[0.0, 0.0, 0.5, 1.0]),
        };
        Spec {
            dims,
            pts,
            upper,
            quad,
            cross,
            cut,
            shared,
            gamma: pick(rng, &[0.5, 1.0, 2.0]),
            price,
        }
    }

    fn n(&self) -> usize {
        self.dims.len()
    }

    fn sum_text(&self) -> String {
        let terms: Vec<String> = (0..self.n())
            .flat_map(|i| (0..self.dims[i]).map(move |k| format!("x{}_{}", i + 1, k + 1)))
            .collect();
        format!("({})", terms.join(" + "))
    }

    fn own_text(&self, i: usize) -> String {
        let mut t = Vec::new();
        for (k, &(a, b)) in self.quad[i].iter().enumerate() {
            t.push(format!("{a} * xi_{c}^2 + {b} * xi_{c}", c = k + 1));
        }
        if self.dims[i] == 2 {
            t.push(format!("{} * xi_1 * xi_2", self.cross[i]));
        }
        t.join(" + ")
    }

    fn objective_text(&self) -> String {
        let s = self.sum_text();
        let pr = &self.price;
        let mut f = format!("{} * (p - ({} - {} * {s}))^2 + {} * p", pr.a, pr.alpha, pr.beta, pr.kappa);
        if pr.minus_ps {
            f = format!("{f} - p * {s}");
        }
        f
    }

    fn build(&self, formulation: Formulation) -> Game {
        let players = (0..self.n())
            .map(|i| {
                let b = ActionBox::uniform(self.dims[i], 0.0, self.upper, self.pts[i]).unwrap();
                let cons = self.cut[i].map(|t| vec![e(&format!("xi_1 + xi_2 - {t}"))]).unwrap_or_default();
                PlayerSpec::new(i, b, e(&self.own_text(i)), cons).unwrap()
            })
            .collect();
        let h = match self.shared {
            Shared::Total => format!("{} * p * {}", self.gamma, self.sum_text()),
            Shared::Own => format!("{} * p * (xi_1{})", self.gamma, if self.dims.iter().all(|&d| d == 2) { " + xi_2" } else { "" }),
            Shared::Zero => "0".into(),
        };
        let pr = &self.price;
        let price = if pr.closed {
            let lattice = ActionBox::uniform(1, -100.0, 100.0, 2).unwrap();
            let rule = format!("{} - {} * {}", pr.alpha, pr.beta, self.sum_text());
            PriceProblem::closed_form_only(lattice, PriceRule::Exprs(vec![e(&rule)])).unwrap()
        } else {
            let upper = if pr.nu == 0.0 {
                format!("{}", pr.hi)
            } else {
                format!("min({}, {} + {} * {})", pr.hi, pr.c0, pr.nu, self.sum_text())
            };
            PriceProblem::new(
                e(&self.objective_text()),
                PriceSet::Box {
                    lower: vec![e(&format!("{}", pr.lo))],
                    upper: vec![e(&upper)],
                },
                ActionBox::uniform(1, pr.lo, pr.hi, pr.pts).unwrap(),
                None,
            )
            .unwrap()
        };
        Game::new(players, SharedTerm::new(e(&h)), price, formulation).unwrap()
    }

    // Oracles restating the instance directly in Rust.

    fn x_ok(&self, x: &[Vec<f64>]) -> bool {
        x.iter().enumerate().all(|(i, xi)| {
            let in_box = xi.iter().all(|&v| (-1e-12..=self.upper + 1e-12).contains(&v));
            let cut = self.cut[i].map_or(true, |t| xi[0] + xi[1] <= t + 1e-9);
            in_box && cut
        })
    }

    fn s(x: &[Vec<f64>]) -> f64 {
        x.iter().flatten().sum()
    }

    fn f(&self, x: &[Vec<f64>], p: f64) -> f64 {
        let pr = &self.price;
        let s = Self::s(x);
        let t = p - (pr.alpha - pr.beta * s);
        pr.a * t * t + pr.kappa * p - if pr.minus_ps { p * s } else { 0.0 }
    }

    fn m_upper(&self, x: &[Vec<f64>]) -> f64 {
        let pr = &self.price;
        if pr.nu == 0.0 {
            pr.hi
        } else {
            pr.hi.min(pr.c0 + pr.nu * Self::s(x))
        }
    }

    fn lattice(&self) -> Vec<f64> {
        let pr = &self.price;
        (0..pr.pts)
            .map(|k| pr.lo + (pr.hi - pr.lo) * k as f64 / (pr.pts - 1) as f64)
            .collect()
    }

    /// `p` is in `SOL[S(x)]`: admissible and within `sol` of the best admissible lattice price.
    fn sol_ok(&self, x: &[Vec<f64>], p: f64, sol: f64) -> bool {
        let pr = &self.price;
        if pr.closed {
            return (p - (pr.alpha - pr.beta * Self::s(x))).abs() <= sol;
        }
        let hi = self.m_upper(x);
        let slack = 1e-9;
        let admissible = |q: f64| q >= pr.lo - slack && q <= hi + slack;
        let best = self
            .lattice()
            .into_iter()
            .filter(|&q| admissible(q))
            .map(|q| self.f(x, q))
            .fold(f64::INFINITY, f64::min);
        admissible(p) && self.f(x, p) <= best + sol
    }

    fn raw_profiles(&self) -> Vec<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<Vec<f64>>> = vec![vec![]];
        for i in 0..self.n() {
            let pts = ActionBox::uniform(self.dims[i], 0.0, self.upper, self.pts[i]).unwrap().points();
            out = out
                .into_iter()
                .flat_map(|pre| {
                    pts.iter().map(move |xi| {
                        let mut v = pre.clone();
                        v.push(xi.clone());
                        v
                    })
                })
                .collect();
        }
        out
    }
}

fn spec_stream(seed: u64, count: usize, mut make: impl FnMut(&mut ChaCha8Rng) -> Spec) -> Vec<Spec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| make(&mut rng)).collect()
}

fn record_line(tag: &str, rec: serde_json::Value) -> String {
    format!("{tag} {rec}\n")
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_e1_suite() -> Res {
    let start = Instant::now();
    let specs = spec_stream(101, 50, |r| {
        let closed = r.gen_bool(0.4);
        Spec::random(r, 3, Shared::Total, closed, 2_000_000)
    });
    let cfg = SolverConfig {
        multistarts: 3,
        ..Default::default()
    };
    let (mut refuted, mut inconclusive, mut records) = (0, 0, String::new());
    for (k, s) in specs.iter().enumerate() {
        let g = s.build(Formulation::AnticipativeE1);
        let pi = construct_sum_potential(&g)?;
        let r = solve_e1(&g, &pi, &cfg)?;
        let cert = check_e1(&g, &r.point.x, r.point.price(), &cfg)?;
        refuted += (cert.verdict == Verdict::Refuted) as usize;
        inconclusive += (cert.verdict == Verdict::Inconclusive) as usize;
        records += &record_line(&format!("e1#{k}"), cert.to_record());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        refuted == 0 && secs <= 60.0,
        format!("50 instances, refuted {refuted}, inconclusive {inconclusive}, {secs:.1}s (budget 60s)"),
        records,
    )
}

fn c2_e2_suite() -> Res {
    let start = Instant::now();
    let specs = spec_stream(202, 50, |r| {
        let closed = r.gen_bool(0.3);
        Spec::random(r, 3, Shared::Own, closed, 2_000_000)
    });
    let cfg = SolverConfig {
        multistarts: 3,
        ..Default::default()
    };
    let (mut refuted, mut inconclusive, mut records) = (0, 0, String::new());
    for (k, s) in specs.iter().enumerate() {
        let g = s.build(Formulation::AnticipativeE2Consistent);
        let pi = construct_sum_potential(&g)?;
        let r = solve_e2_consistent(&g, &pi, &cfg)?;
        let cert = check_e2_consistent(&g, &r.point.x, r.point.price(), &cfg)?;
        refuted += (cert.verdict == Verdict::Refuted) as usize;
        inconclusive += (cert.verdict == Verdict::Inconclusive) as usize;
        records += &record_line(&format!("e2#{k}"), cert.to_record());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        refuted == 0 && secs <= 60.0,
        format!("50 instances, refuted {refuted}, inconclusive {inconclusive}, {secs:.1}s (budget 60s)"),
        records,
    )
}

/// Lattice prices, gap midpoints and a point just past each end.
fn probe_prices(s: &Spec) -> Vec<f64> {
    let lat = s.lattice();
    let mut out = lat.clone();
    out.extend(lat.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(lat[0] - 1.0);
    out.push(lat[lat.len() - 1] + 1.0);
    out
}

fn c3_membership() -> Res {
    let tol = Tolerances::default();
    let (mut checked, mut bad, mut positives) = (0u64, 0u64, 0u64);
    // F1 on anticipative-e1 instances with joint grid up to 1e5
    let f1_specs = spec_stream(303, 4, |r| {
        let mut s = Spec::random(r, 3, Shared::Total, false, 100_000);
        s.price.nu = 1.0;
        s
    });
    for s in &f1_specs {
        let g = s.build(Formulation::AnticipativeE1);
        let prices = probe_prices(s);
        for x in s.raw_profiles() {
            let x_ok = s.x_ok(&x);
            for &p in &prices {
                let oracle = x_ok && s.sol_ok(&x, p, tol.sol);
                checked += 1;
                positives += oracle as u64;
                bad += (member_f1(&g, &x, &[p], &tol) != oracle) as u64;
            }
        }
    }
    // F2 on two-player anticipative-e2 instances: conjecture pairs over the probe prices
    let f2_specs = spec_stream(304, 4, |r| loop {
        let mut s = Spec::random(r, 2, Shared::Own, false, 10_000);
        if s.n() == 2 {
            s.price.nu = 0.5;
            break s;
        }
    });
    for s in &f2_specs {
        let g = s.build(Formulation::AnticipativeE2Consistent);
        let mut prices = probe_prices(s);
        prices.push(s.lattice()[0] + 0.5 * tol.eq);
        for x in s.raw_profiles() {
            let x_ok = s.x_ok(&x);
            for &p1 in &prices {
                for &p2 in &prices {
                    let in_b = (p1 - p2).abs() <= tol.eq;
                    let in_h = s.sol_ok(&x, p1, tol.sol) && s.sol_ok(&x, p2, tol.sol);
                    let oracle = x_ok && in_b && in_h;
                    checked += 1;
                    positives += oracle as u64;
                    bad += (member_f2(&g, &x, &[vec![p1], vec![p2]], &tol)? != oracle) as u64;
                }
            }
        }
    }
    outcome(
        bad == 0 && positives > 0,
        format!("{checked} membership queries ({positives} members), counterexamples {bad}"),
        format!("{checked} {positives} {bad}\n"),
    )
}

fn tm_spec(r: &mut ChaCha8Rng, linear_price: bool) -> Spec {
    let mut s = Spec::random(r, 2, if linear_price { Shared::Total } else { Shared::Zero }, false, 5_000);
    s.gamma = 1.0;
    s.price.minus_ps = linear_price;
    s.price.beta = 0.0;
    s.price.nu = pick(r, &[0.5, 1.0]);
    s
}

fn c4_tm_suite() -> Res {
    let cfg = SolverConfig::default();
    let tol = Tolerances::default();
    let (mut refuted, mut no_potential, mut records) = (0, 0, String::new());
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for k in 0..20 {
        let s = tm_spec(&mut rng, k % 2 == 1);
        let g = s.build(Formulation::TakingTm);
        let pi = construct_sum_potential(&g)?;
        let big = match construct_tm_potential(&g, &pi, 1000, k as u64, &tol) {
            Ok(b) => b,
            Err(_) => {
                no_potential += 1;
                continue;
            }
        };
        let r = solve_tm(&g, &big, &cfg)?;
        let cert = check_tm(&g, &r.point.x, r.point.price(), &cfg)?;
        refuted += (cert.verdict == Verdict::Refuted) as usize;
        records += &record_line(&format!("tm#{k}"), cert.to_record());
    }
    outcome(
        refuted == 0 && no_potential == 0,
        format!("20 instances (10 separable, 10 with h = p S), potential rejected {no_potential}, refuted {refuted}"),
        records,
    )
}

fn c5_inclusion() -> Res {
    let cfg = SolverConfig::default();
    let (mut violations, mut t_total, mut tm_total, mut records) = (0, 0, 0, String::new());
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for k in 0..20 {
        let shared = pick(&mut rng, &[Shared::Total, Shared::Zero]);
        let mut s = Spec::random(&mut rng, 2, shared, false, 2_000);
        s.price.nu = pick(&mut rng, &[0.5, 1.0, 2.0]);
        s.price.c0 = pick(&mut rng, &[0.0, 0.5, 1.0]);
        let g = s.build(Formulation::TakingTm);
        let t = enumerate_equilibria(&g, EquilibriumKind::T, &cfg)?;
        let tm = enumerate_equilibria(&g, EquilibriumKind::Tm, &cfg)?;
        t_total += t.len();
        tm_total += tm.len();
        violations += t
            .iter()
            .filter(|a| !tm.iter().any(|b| same_point(&a.point, &b.point)))
            .count();
        records += &format!("incl#{k} {} {}\n", t.len(), tm.len());
    }
    outcome(
        violations == 0 && t_total > 0,
        format!("20 coupled instances, {t_total} T points, {tm_total} Tm points, violations {violations}"),
        records,
    )
}

fn catalog_game(name: &str) -> Result<(price_coupling::GameFile, Game), Box<dyn std::error::Error>> {
    match catalog::example(name)?.parse()? {
        Input::Game(f) => {
            let g = f.build(None)?;
            Ok((f, g))
        }
        Input::Gep(_) => Err(format!("{name} is a scenario").into()),
    }
}

fn c6_discriminator() -> Res {
    let cfg = SolverConfig::default();
    let (file, g) = catalog_game("tm-coupled")?;
    let (x, p) = file.candidate::<f64>().ok_or("no candidate")?;
    let tm = check_tm(&g, &x, &p, &cfg)?;
    let t = check_t(&g, &x, &p, &cfg)?;
    let gamma_partial = tm.gamma_full.as_ref().is_some_and(|v| v.contains(&false));
    let w = t.witness.as_ref().ok_or("no witness")?;
    outcome(
        tm.verdict == Verdict::Certified && t.verdict == Verdict::Refuted && gamma_partial,
        format!(
            "at x = {x:?}, p = {p:?}: Tm {:?}, T {:?} via move to {:?} (gain {})",
            tm.verdict, t.verdict, w.action, w.gain
        ),
        record_line("tm", tm.to_record()) + &record_line("t", t.to_record()),
    )
}

fn c7_cournot() -> Res {
    let cfg = SolverConfig::default();
    let src = catalog::example("cournot")?.source;
    let mut detail = Vec::new();
    let mut pass = true;
    let mut records = String::new();
    // firm i: a - 2 q_i - q_j - 2 q_i = 0, so q = a / 5
    for a in [10.0, 11.0] {
        let text = src
            .replace("10 - x1 - x2", &format!("{a} - x1 - x2"))
            .replace("[-10]", "[-20]")
            .replace("[10]", "[20]")
            .replace("\"-10\"", "\"-20\"")
            .replace("\"10\"", "\"20\"");
        let Input::Game(f) = parse_input(&text)? else {
            return Err("cournot is a game".into());
        };
        let g = f.build(None)?;
        let step: f64 = 0.25;
        let q: f64 = a / 5.0;
        let eqs: Vec<price_coupling::EquilibriumCertificate<f64>> = enumerate_equilibria(&g, EquilibriumKind::E2, &cfg)?;
        let near = eqs
            .iter()
            .all(|c| c.point.x.iter().all(|xi| (xi[0] - q).abs() <= step + 1e-12));
        pass &= !eqs.is_empty() && near;
        let found: Vec<Vec<f64>> = eqs.iter().map(|c| c.point.x.iter().map(|v| v[0]).collect()).collect();
        detail.push(format!("a = {a}: oracle q = {q}, grid equilibria {found:?}"));
        for c in &eqs {
            records += &record_line("cournot", c.to_record());
        }
    }
    outcome(pass, detail.join("; ") + " (tolerance 0.25)", records)
}

fn one_company(loads: &str) -> GepScenario {
    GepScenario::from_json(&format!(
        r#"{{
        "horizon": 1,
        "companies": [{{
            "capital_cost": "2.1 * q^2", "fuel_cost": "q + 0.1 * q^2",
            "forced_outage_rate": 0,
            "capacity_bounds": {{"lower": 0, "upper": 10, "points": 41}},
            "reserve_bounds": {{"lower": 0, "upper": 0, "points": 2}},
            "energy_bounds": {{"lower": 0, "upper": 10, "points": 41}},
            "rt_bounds": {{"lower": 0, "upper": 0, "points": 2}}
        }}],
        "loads": {loads},
        "eldc_breakpoints": [[0, 1], [100, 0]],
        "rho_avg": 0, "outage_cost": 0, "existing_capacity": 0
    }}"#
    ))
    .unwrap()
}

fn symmetric_pair() -> GepScenario {
    let company = r#"{
        "capital_cost": "0.01 * q^2", "fuel_cost": "q + 0.25 * q^2",
        "forced_outage_rate": 0.1,
        "capacity_bounds": {"lower": 0, "upper": 4, "points": 9},
        "reserve_bounds": {"lower": 0, "upper": 0, "points": 2},
        "energy_bounds": {"lower": 0, "upper": 4, "points": 9},
        "rt_bounds": {"lower": 0, "upper": 0, "points": 2}
    }"#;
    GepScenario::from_json(&format!(
        r#"{{"horizon": 1, "companies": [{company}, {company}], "loads": [6],
            "eldc_breakpoints": [[0, 1], [4, 0]], "rho_avg": 0.1, "outage_cost": 2,
            "existing_capacity": 1, "scarcity_adder": 4}}"#
    ))
    .unwrap()
}

fn c8_gep_taking() -> Res {
    let cfg = SolverConfig::default();
    // below the load the energy price is 11 F'(e) = 11 + 2.2 e; with x_c = e the
    // price taker equates it with F'(e) + C'(e) = 1 + 4.4 e
    let foc = 10.0 / 2.2;
    let single = solve_gep_price_taking::<f64>(&one_company("[10]"), &cfg)?;
    let e1 = single.decisions[0].e[0];
    let ok1 = single.certificate.is_certified() && (e1 - foc).abs() <= 0.25;
    let pair = solve_gep_price_taking::<f64>(&symmetric_pair(), &cfg)?;
    let ok2 = pair.certificate.is_certified() && pair.decisions[0] == pair.decisions[1];
    outcome(
        ok1 && ok2,
        format!(
            "N=1: e = {e1} vs first-order {foc:.4} (step 0.25), {:?}; N=2: e = ({}, {}), {:?}",
            single.certificate.verdict, pair.decisions[0].e[0], pair.decisions[1].e[0], pair.certificate.verdict
        ),
        record_line("single", single.certificate.to_record()) + &record_line("pair", pair.certificate.to_record()),
    )
}

fn two_period(ramp: &str) -> GepScenario {
    GepScenario::from_json(&format!(
        r#"{{"horizon": 2, "companies": [{{
            "capital_cost": "3 * q", "fuel_cost": "0.5 * q + 0.2 * q^2",
            "forced_outage_rate": 0.1{ramp},
            "capacity_bounds": {{"lower": 6, "upper": 6, "points": 2}},
            "reserve_bounds": {{"lower": 0, "upper": 2, "points": 3}},
            "energy_bounds": {{"lower": 0, "upper": 6, "points": 7}},
            "rt_bounds": {{"lower": 0, "upper": 2, "points": 3}}
        }}],
        "loads": [2, 5], "eldc_breakpoints": [[0, 1], [20, 0]], "rho_avg": 0.05,
        "outage_cost": 1.5, "existing_capacity": 2, "scarcity_adder": 3}}"#
    ))
    .unwrap()
}

/// Best one-period profit at capacity 6, with prices restated from the market rules.
fn period_optimum(load: f64) -> f64 {
    let mc = |q: f64| 0.5 + 0.4 * q;
    let fuel = |q: f64| 0.5 * q + 0.2 * q * q;
    let mut best = f64::NEG_INFINITY;
    for xo in [0.0, 1.0, 2.0] {
        for e in 0..=6 {
            for r in [0.0, 1.0, 2.0] {
                let e = e as f64;
                if e > 6.0 - xo || r > 6.0 - e {
                    continue;
                }
                let reserve = 2.0 * 0.95 * (1.0 - (2.0 + xo) / 20.0) * 1.5;
                let energy = if e >= load { mc(e) } else { mc(e) + 3.0 };
                let rt = if r >= 0.1 * e { mc(e + r) } else { mc(e + r) + 3.0 };
                best = best.max(reserve * xo + energy * e + rt * r - fuel(e + r));
            }
        }
    }
    best
}

fn c9_gep_anticipative() -> Res {
    let cfg = SolverConfig::default();
    let oracle = period_optimum(2.0) + period_optimum(5.0) - 18.0;
    let mut records = String::new();
    let mut worst = 0.0f64;
    let mut ok = true;
    for ramp in ["", r#", "ramp_up": 1e9, "ramp_down": -1e9"#] {
        let out = solve_gep_anticipative::<f64>(&two_period(ramp), &cfg)?;
        worst = worst.max((out.result.surrogate_value - oracle).abs());
        ok &= out.certificate.is_certified();
        records += &record_line("free", out.certificate.to_record());
    }
    ok &= worst <= cfg.tol.dev;
    let frozen = solve_gep_anticipative::<f64>(&two_period(r#", "ramp_up": 0, "ramp_down": 0"#), &cfg)?;
    let d = &frozen.decisions[0];
    let constant = d.e[0] + d.r[0] == d.e[1] + d.r[1];
    records += &record_line("frozen", frozen.certificate.to_record());
    let s = one_company("[10]");
    let ant = solve_gep_anticipative::<f64>(&s, &cfg)?;
    let tak = solve_gep_price_taking::<f64>(&s, &cfg)?;
    let gap = (ant.decisions[0].e[0] - tak.decisions[0].e[0]).abs();
    records += &record_line("withholding", ant.certificate.to_record());
    outcome(
        ok && constant && gap > 0.25,
        format!(
            "unlimited ramps off the per-period oracle by {worst:e} (tol {}); zero ramps e+r = ({}, {}); \
             withholding e anticipative {} vs taking {} (gap {gap} > step 0.25)",
            cfg.tol.dev,
            d.e[0] + d.r[0],
            d.e[1] + d.r[1],
            ant.decisions[0].e[0],
            tak.decisions[0].e[0]
        ),
        records,
    )
}

fn c10_potentials() -> Res {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    let mut records = String::new();
    for entry in catalog::catalog() {
        let game: Game = match entry.parse()? {
            Input::Game(f) => f.build(None)?,
            Input::Gep(s) => build_gep_game(&s, Formulation::AnticipativeE2Consistent)?,
        };
        let Ok(pi) = construct_sum_potential(&game) else {
            continue;
        };
        let rep = verify_potential(&pi, &game, 1000, 11, &tol);
        worst = worst.max(rep.max_violation);
        names.push(entry.name);
        records += &format!("{} {:e} {}\n", entry.name, rep.max_violation, rep.samples);
    }
    let gep_covered = names.iter().filter(|n| n.starts_with("gep")).count();
    outcome(
        worst <= 1e-8 && names.len() >= 5 && gep_covered >= 1,
        format!("{} instances ({}), max violation {worst:e} <= 1e-8 on 1000 samples", names.len(), names.join(", ")),
        records,
    )
}

type Criterion = (u32, &'static str, fn() -> Res);

const CRITERIA: [Criterion; 10] = [
    (1, "E1 suite", c1_e1_suite),
    (2, "E2-consistent suite", c2_e2_suite),
    (3, "F1/F2 membership equivalence", c3_membership),
    (4, "Tm suite", c4_tm_suite),
    (5, "T within Tm", c5_inclusion),
    (6, "Tm/T discriminator", c6_discriminator),
    (7, "Cournot oracle", c7_cournot),
    (8, "GEP price-taking", c8_gep_taking),
    (9, "GEP anticipative", c9_gep_anticipative),
    (10, "potential verification", c10_potentials),
];

fn run(f: fn() -> Res) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(o)) => o,
        Ok(Err(err)) => Outcome {
            pass: false,
            detail: format!("error: {err}"),
            records: String::new(),
        },
        Err(_) => Outcome {
            pass: false,
            detail: "panicked".into(),
            records: String::new(),
        },
    }
}

fn main() {
    let mut failed = 0;
    let mut first = Vec::new();
    for (n, name, f) in CRITERIA {
        let start = Instant::now();
        let o = run(f);
        println!(
            "{} criterion {n:>2} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += !o.pass as usize;
        first.push(o.records);
    }
    let start = Instant::now();
    let differing: Vec<u32> = CRITERIA
        .iter()
        .zip(&first)
        .filter(|((_, _, f), rec)| run(*f).records != **rec)
        .map(|((n, _, _), _)| *n)
        .collect();
    let bytes: usize = first.iter().map(String::len).sum();
    let pass = differing.is_empty() && first.iter().all(|r| !r.is_empty());
    println!(
        "{} criterion 11 determinism: reran criteria 1-10 with the same seeds, {bytes} record bytes, differing {differing:?} [{:.2}s]",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    failed += !pass as usize;
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
