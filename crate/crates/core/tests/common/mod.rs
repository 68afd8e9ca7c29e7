//! Reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use reactmp::dist::{Distribution, Point};
use reactmp::model::config::LgssmParams;

// Kalman filter and RTS smoother written directly from the recursions.
pub struct Smoothed {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub log_evidence: f64,
}

pub fn gauss_logpdf(y: &DVector<f64>, m: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let k = y.len() as f64;
    let chol = s.clone().cholesky().unwrap();
    let r = y - m;
    let quad = r.dot(&chol.solve(&r));
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

pub fn rts(p: &LgssmParams, ys: &[DVector<f64>]) -> Smoothed {
    let n = ys.len();
    let d = p.a.nrows();
    let (mut mf, mut sf, mut mp, mut sp) = (vec![], vec![], vec![], vec![]);
    let mut log_evidence = 0.0;
    for (t, y) in ys.iter().enumerate() {
        let (m_pred, s_pred) = if t == 0 {
            (p.prior_mean.clone(), p.prior_cov.clone())
        } else {
            (&p.a * &mf[t - 1], &p.a * &sf[t - 1] * p.a.transpose() + &p.p)
        };
        let sy = &p.b * &s_pred * p.b.transpose() + &p.q;
        log_evidence += gauss_logpdf(y, &(&p.b * &m_pred), &sy);
        let k = &s_pred * p.b.transpose() * sy.clone().try_inverse().unwrap();
        let m = &m_pred + &k * (y - &p.b * &m_pred);
        let ikb = DMatrix::identity(d, d) - &k * &p.b;
        let s = &ikb * &s_pred * ikb.transpose() + &k * &p.q * k.transpose();
        mp.push(m_pred);
        sp.push(s_pred);
        mf.push(m);
        sf.push(s);
    }
    let mut means = mf.clone();
    let mut covs = sf.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let g = &sf[t] * p.a.transpose() * sp[t + 1].clone().try_inverse().unwrap();
        means[t] = &mf[t] + &g * (&means[t + 1] - &mp[t + 1]);
        covs[t] = &sf[t] + &g * (&covs[t + 1] - &sp[t + 1]) * g.transpose();
    }
    Smoothed { means, covs, log_evidence }
}

pub fn random_params(rng: &mut ChaCha8Rng, d: usize) -> LgssmParams {
    let theta: f64 = rng.random_range(0.05..0.5);
    let mut a = LgssmParams::default_transition(d);
    if d > 1 {
        a[(0, 0)] = theta.cos();
        a[(0, 1)] = -theta.sin();
        a[(1, 0)] = theta.sin();
        a[(1, 1)] = theta.cos();
    }
    a *= rng.random_range(0.8..1.0);
    let spd = |rng: &mut ChaCha8Rng, scale: f64| {
        let l = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.3);
        &l * l.transpose() + DMatrix::identity(d, d) * scale
    };
    LgssmParams {
        b: DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.3..0.3) }),
        p: spd(rng, 0.5),
        q: spd(rng, 1.0),
        prior_mean: DVector::zeros(d),
        prior_cov: DMatrix::identity(d, d) * 100.0,
        a,
    }
}

pub fn simulate_lgssm(rng: &mut ChaCha8Rng, p: &LgssmParams, n: usize) -> Vec<DVector<f64>> {
    let d = p.a.nrows();
    let noise = |rng: &mut ChaCha8Rng, c: &DMatrix<f64>| {
        let l = c.clone().cholesky().unwrap().l();
        l * DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
    };
    let mut x = DVector::zeros(d);
    (0..n)
        .map(|_| {
            x = &p.a * &x + noise(rng, &p.p);
            &p.b * &x + noise(rng, &p.q)
        })
        .collect()
}

pub fn all_paths(m: usize, n: usize) -> Vec<Vec<usize>> {
    (0..m.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let s = c % m;
                    c /= m;
                    s
                })
                .collect()
        })
        .collect()
}

// log p(x) and p(z_t | x) by summing over every state path; uniform initial state.
pub fn enumerate_known(a: &DMatrix<f64>, b: &DMatrix<f64>, xs: &[usize]) -> (f64, Vec<DVector<f64>>) {
    let m = a.nrows();
    let n = xs.len();
    let mut total = 0.0;
    let mut post = vec![DVector::zeros(m); n];
    for path in all_paths(m, n) {
        let mut p = 1.0 / m as f64;
        for t in 0..n {
            if t > 0 {
                p *= a[(path[t], path[t - 1])];
            }
            p *= b[(xs[t], path[t])];
        }
        total += p;
        for t in 0..n {
            post[t][path[t]] += p;
        }
    }
    (total.ln(), post.into_iter().map(|v| v / total).collect())
}

// log p(x) with column-wise Dirichlet priors on both matrices integrated out.
pub fn enumerate_learned(prior_a: &DMatrix<f64>, prior_b: &DMatrix<f64>, xs: &[usize]) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let m = prior_a.nrows();
    let n = xs.len();
    let dirmult = |alpha: &DMatrix<f64>, counts: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for j in 0..alpha.ncols() {
            let (a0, c0) = (alpha.column(j).sum(), counts.column(j).sum());
            s += ln_gamma(a0) - ln_gamma(a0 + c0);
            for i in 0..alpha.nrows() {
                s += ln_gamma(alpha[(i, j)] + counts[(i, j)]) - ln_gamma(alpha[(i, j)]);
            }
        }
        s
    };
    let terms: Vec<f64> = all_paths(m, n)
        .into_iter()
        .map(|path| {
            let mut ca = DMatrix::zeros(m, m);
            let mut cb = DMatrix::zeros(m, m);
            for t in 0..n {
                if t > 0 {
                    ca[(path[t], path[t - 1])] += 1.0;
                }
                cb[(xs[t], path[t])] += 1.0;
            }
            -(m as f64).ln() + dirmult(prior_a, &ca) + dirmult(prior_b, &cb)
        })
        .collect();
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

// Smoothed state probabilities of a known HMM by scaled forward-backward; uniform initial state.
pub fn forward_backward(a: &DMatrix<f64>, b: &DMatrix<f64>, xs: &[usize]) -> Vec<DVector<f64>> {
    let m = a.nrows();
    let n = xs.len();
    let mut alpha = Vec::with_capacity(n);
    let mut prev = DVector::from_element(m, 1.0 / m as f64);
    for (t, &x) in xs.iter().enumerate() {
        let pred = if t == 0 { prev.clone() } else { a * &prev };
        let mut f = pred.component_mul(&b.row(x).transpose());
        f /= f.sum();
        alpha.push(f.clone());
        prev = f;
    }
    let mut beta = DVector::from_element(m, 1.0);
    let mut post = vec![DVector::zeros(m); n];
    for t in (0..n).rev() {
        let mut g = alpha[t].component_mul(&beta);
        g /= g.sum();
        post[t] = g;
        let e = beta.component_mul(&b.row(xs[t]).transpose());
        beta = a.transpose() * e;
        beta /= beta.sum();
    }
    post
}

/// Reference model of `combine_latest` over `k` subjects, driven by scripted events.
pub mod kernel {
    use std::cell::RefCell;
    use std::rc::Rc;

    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use reactmp::reactive::ops::combine_latest;
    use reactmp::reactive::Subject;
    use reactmp::Error;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub enum Event {
        Push(usize, i64),
        Complete(usize),
        Fail(usize),
        Unsubscribe,
    }

    #[derive(Debug, Clone, PartialEq)]
    pub enum Seen {
        Next(Vec<i64>),
        Error,
        Complete,
    }

    pub fn random_events(rng: &mut ChaCha8Rng, k: usize, len: usize) -> Vec<Event> {
        (0..len)
            .map(|_| match rng.random_range(0..100) {
                0..=84 => Event::Push(rng.random_range(0..k), rng.random_range(-50..50)),
                85..=93 => Event::Complete(rng.random_range(0..k)),
                94..=97 => Event::Fail(rng.random_range(0..k)),
                _ => Event::Unsubscribe,
            })
            .collect()
    }

    /// What a subscriber should see, written as plain sequential state updates.
    pub fn replay(k: usize, events: &[Event]) -> Vec<Seen> {
        let mut latest: Vec<Option<i64>> = vec![None; k];
        let mut ended = vec![false; k];
        let mut completed = 0;
        let mut open = true;
        let mut out = Vec::new();
        for &e in events {
            match e {
                Event::Push(i, v) if !ended[i] => {
                    latest[i] = Some(v);
                    if open && latest.iter().all(Option::is_some) {
                        out.push(Seen::Next(latest.iter().map(|x| x.unwrap()).collect()));
                    }
                }
                Event::Complete(i) if !ended[i] => {
                    ended[i] = true;
                    completed += 1;
                    if open && completed == k {
                        out.push(Seen::Complete);
                        open = false;
                    }
                }
                Event::Fail(i) if !ended[i] => {
                    ended[i] = true;
                    if open {
                        out.push(Seen::Error);
                        open = false;
                    }
                }
                Event::Unsubscribe => open = false,
                _ => {}
            }
        }
        out
    }

    /// The same script run against real subjects and `combine_latest`.
    pub fn run(k: usize, events: &[Event]) -> Vec<Seen> {
        let subjects: Vec<Subject<i64>> = (0..k).map(|_| Subject::new()).collect();
        let stream = combine_latest(subjects.iter().map(|s| s.stream()).collect()).unwrap();
        let log = Rc::new(RefCell::new(Vec::new()));
        let (a, b, c) = (log.clone(), log.clone(), log.clone());
        let sub = stream.subscribe_all(
            move |v| a.borrow_mut().push(Seen::Next(v)),
            move |_| b.borrow_mut().push(Seen::Error),
            move || c.borrow_mut().push(Seen::Complete),
        );
        for &e in events {
            match e {
                Event::Push(i, v) => {
                    let _ = subjects[i].push(v);
                }
                Event::Complete(i) => subjects[i].complete(),
                Event::Fail(i) => subjects[i].error(Error::Fault("scripted".into())),
                Event::Unsubscribe => sub.unsubscribe(),
            }
        }
        let seen = log.borrow().clone();
        seen
    }
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + h * i as f64);
    }
    acc * h / 3.0
}

pub fn pdf(d: &Distribution, x: f64) -> f64 {
    d.log_pdf(&Point::Scalar(x)).unwrap().exp()
}

/// Integration window covering essentially all mass of `d`.
pub fn window(d: &Distribution) -> (f64, f64) {
    match d {
        Distribution::Beta { .. } => (0.0, 1.0),
        Distribution::Gamma { .. } => {
            let m = d.mean_scalar().unwrap();
            (0.0, m + 40.0 * d.var_scalar().unwrap().sqrt())
        }
        _ => {
            let m = d.mean_scalar().unwrap();
            let s = d.var_scalar().unwrap().sqrt();
            (m - 20.0 * s, m + 20.0 * s)
        }
    }
}

/// Integrates `g(x)` against `d` after smoothing the boundary with a square
/// substitution where the support is bounded.
pub fn integrate_over(d: &Distribution, g: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = window(d);
    match d {
        Distribution::Gamma { .. } => simpson(|t| 2.0 * t * g(t * t), 0.0, hi.sqrt(), 200_000),
        Distribution::Beta { .. } => {
            simpson(|t| 2.0 * t.sin() * t.cos() * g(t.sin().powi(2)), 0.0, PI / 2.0, 200_000)
        }
        _ => simpson(g, lo, hi, 200_000),
    }
}
