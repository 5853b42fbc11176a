//! Nelder–Mead simplex minimizer with projection onto a feasible set.

/// Outcome of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Stopped because the simplex values agreed to within the tolerance.
    pub converged: bool,
    /// Stopped because the evaluation budget ran out.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Absolute spread `f_max - f_min` that ends a run.
    pub tolerance: f64,
    /// Restart once from the best point with a simplex shrunk by this factor.
    pub restart_shrink: Option<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Evaluator<'a, F, P> {
    f: &'a mut F,
    project: &'a P,
    evals: usize,
    max_evals: usize,
}

impl<F: FnMut(&[f64]) -> f64, P: Fn(&[f64]) -> Vec<f64>> Evaluator<'_, F, P> {
    fn eval(&mut self, x: Vec<f64>) -> (Vec<f64>, f64) {
        let x = (self.project)(&x);
        self.evals += 1;
        let v = (self.f)(&x);
        (x, if v.is_nan() { f64::INFINITY } else { v })
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }
}

/// Minimizes `f` starting from `x0` with initial axis steps `steps`.
///
/// Every trial point passes through `project` before it is evaluated and
/// stored, so the simplex never leaves the feasible set.
pub fn minimize<F, P>(mut f: F, project: P, x0: &[f64], steps: &[f64], opts: SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&[f64]) -> Vec<f64>,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut ev = Evaluator { f: &mut f, project: &project, evals: 0, max_evals: opts.max_evals.max(1) };
    let (start, start_value) = ev.eval(x0.to_vec());
    let mut best = (start, start_value);
    let mut converged = false;

    let mut scales = vec![1.0];
    if let Some(shrink) = opts.restart_shrink {
        scales.push(shrink);
    }
    for scale in scales {
        if ev.exhausted() {
            break;
        }
        let steps: Vec<f64> = steps.iter().map(|s| s * scale).collect();
        let (point, value, conv) = run(&mut ev, best.clone(), &steps, opts.tolerance);
        converged = conv;
        if value < best.1 {
            best = (point, value);
        } else if conv {
            // restart found nothing better: stagnated at `best`
            break;
        }
    }
    Minimum {
        point: best.0,
        value: best.1,
        evals: ev.evals,
        converged,
        budget_exhausted: !converged,
    }
}

fn run<F, P>(
    ev: &mut Evaluator<'_, F, P>,
    start: (Vec<f64>, f64),
    steps: &[f64],
    tol: f64,
) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let dim = start.0.len();
    let mut simplex = vec![start.clone()];
    for i in 0..dim {
        if ev.exhausted() {
            break;
        }
        let mut x = start.0.clone();
        x[i] += steps[i];
        simplex.push(ev.eval(x));
    }
    if simplex.len() < dim + 1 {
        return best_of(simplex, false);
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread <= tol || (simplex[0].1.is_infinite() && simplex[dim].1.is_infinite()) {
            return best_of(simplex, true);
        }
        if ev.exhausted() {
            return best_of(simplex, false);
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let reflected = ev.eval(along(REFLECT));
        if reflected.1 < simplex[0].1 {
            if ev.exhausted() {
                simplex[dim] = reflected;
                continue;
            }
            let expanded = ev.eval(along(EXPAND));
            simplex[dim] = if expanded.1 < reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 < simplex[dim - 1].1 {
            simplex[dim] = reflected;
            continue;
        }
        if ev.exhausted() {
            if reflected.1 < worst.1 {
                simplex[dim] = reflected;
            }
            continue;
        }
        let contracted = if reflected.1 < worst.1 {
            ev.eval(along(CONTRACT * REFLECT))
        } else {
            ev.eval(along(-CONTRACT))
        };
        if contracted.1 < worst.1.min(reflected.1) {
            simplex[dim] = contracted;
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if ev.exhausted() {
                break;
            }
            let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, v)| a + SHRINK * (v - a)).collect();
            *vertex = ev.eval(x);
        }
    }
}

fn best_of(simplex: Vec<(Vec<f64>, f64)>, converged: bool) -> (Vec<f64>, f64, bool) {
    let (x, v) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex has a vertex");
    (x, v, converged)
}
