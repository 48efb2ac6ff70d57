//! Sparse linear models (softmax classifier and conditional-logit pointer)
//! trained by full-batch L-BFGS with an Armijo line search.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("no training examples")]
    EmptyDataset,
    #[error("class `{0}` has no training examples")]
    EmptyClass(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub max_iters: usize,
    /// Stop when the relative loss decrease falls below this.
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { l2: 1e-3, max_iters: 150, tol: 1e-7 }
    }
}

/// String feature names mapped to dense ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.ids.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.ids.insert(s.to_string(), i);
        self.names.push(s.to_string());
        i
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn from_names(names: Vec<String>) -> Interner {
        let ids = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        Interner { ids, names }
    }

    /// Known feature ids, deduplicated; unknown names are dropped.
    pub fn lookup(&self, feats: &[String]) -> Vec<u32> {
        let mut v: Vec<u32> = feats.iter().filter_map(|f| self.get(f)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn intern_all(&mut self, feats: &[String]) -> Vec<u32> {
        let mut v: Vec<u32> = feats.iter().map(|f| self.intern(f)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Limited-memory BFGS with backtracking Armijo steps. The loss sequence is
/// non-increasing by construction. Returns the minimizer and loss history.
pub fn minimize(
    f: &dyn Fn(&[f64], &mut [f64]) -> f64,
    mut x: Vec<f64>,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    const M: usize = 8;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    for _ in 0..max_iters {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-10 {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha[i] - beta) * sj;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
            s_hist.clear();
            y_hist.clear();
        }
        let mut t = if k == 0 { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 {
                    if s_hist.len() == M {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                let rel = (fx - f_new) / fx.abs().max(1e-12);
                fx = f_new;
                history.push(fx);
                accepted = true;
                if rel < tol {
                    return (x, history);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, history)
}

fn log_softmax_inplace(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter_mut().for_each(|v| *v -= lse);
}

/// Multiclass softmax regression over binary sparse features.
#[derive(Debug, Clone, PartialEq)]
pub struct Softmax {
    pub classes: Vec<String>,
    features: Interner,
    /// Row-major `[feature][class]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SoftmaxJson {
    kind: String,
    classes: Vec<String>,
    bias: Vec<f64>,
    weights: BTreeMap<String, Vec<f64>>,
}

impl Softmax {
    /// Train with the class set taken from the labels (sorted).
    pub fn train(data: &[(Vec<String>, String)], cfg: &TrainConfig) -> Result<Softmax, LearnError> {
        let mut classes: Vec<String> = data.iter().map(|(_, l)| l.clone()).collect();
        classes.sort();
        classes.dedup();
        Softmax::train_with_classes(&classes, data, cfg)
    }

    pub fn train_with_classes(
        classes: &[String],
        data: &[(Vec<String>, String)],
        cfg: &TrainConfig,
    ) -> Result<Softmax, LearnError> {
        if data.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let k = classes.len();
        let mut counts = vec![0usize; k];
        let mut features = Interner::default();
        let mut xs = Vec::with_capacity(data.len());
        for (feats, label) in data {
            let y = classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| LearnError::DimensionMismatch(format!("label `{label}` not among classes")))?;
            counts[y] += 1;
            xs.push((features.intern_all(feats), y));
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(LearnError::EmptyClass(classes[i].clone()));
        }
        let nf = features.len();
        let dim = nf * k + k;
        let n = xs.len() as f64;
        let l2 = cfg.l2;
        let objective = |w: &[f64], grad: &mut [f64]| -> f64 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let (wm, b) = w.split_at(nf * k);
            let mut loss = 0.0;
            let mut z = vec![0.0; k];
            for (x, y) in &xs {
                z.copy_from_slice(b);
                for &fi in x {
                    let row = &wm[fi as usize * k..fi as usize * k + k];
                    z.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                log_softmax_inplace(&mut z);
                loss -= z[*y];
                for c in 0..k {
                    let p = z[c].exp() - if c == *y { 1.0 } else { 0.0 };
                    let p = p / n;
                    for &fi in x {
                        grad[fi as usize * k + c] += p;
                    }
                    grad[nf * k + c] += p;
                }
            }
            let mut reg = 0.0;
            for i in 0..nf * k {
                reg += wm[i] * wm[i];
                grad[i] += l2 * wm[i];
            }
            loss / n + 0.5 * l2 * reg
        };
        let (w, history) = minimize(&objective, vec![0.0; dim], cfg.max_iters, cfg.tol);
        let (wm, b) = w.split_at(nf * k);
        Ok(Softmax {
            classes: classes.to_vec(),
            features,
            weights: wm.to_vec(),
            bias: b.to_vec(),
            loss_history: history,
        })
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn scores(&self, feats: &[String]) -> Vec<f64> {
        let k = self.classes.len();
        let mut z = self.bias.clone();
        for fi in self.features.lookup(feats) {
            let row = &self.weights[fi as usize * k..fi as usize * k + k];
            z.iter_mut().zip(row).for_each(|(a, r)| *a += r);
        }
        z
    }

    pub fn predict_proba(&self, feats: &[String]) -> Vec<f64> {
        let mut z = self.scores(feats);
        log_softmax_inplace(&mut z);
        z.iter().map(|v| v.exp()).collect()
    }

    /// Highest-scoring class among those allowed by `mask` (ties → first).
    pub fn predict_masked(&self, feats: &[String], mask: &dyn Fn(&str) -> bool) -> Option<&str> {
        let z = self.scores(feats);
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.classes.iter().enumerate() {
            if mask(c) && best.is_none_or(|(_, s)| z[i] > s) {
                best = Some((i, z[i]));
            }
        }
        best.map(|(i, _)| self.classes[i].as_str())
    }

    pub fn predict(&self, feats: &[String]) -> &str {
        self.predict_masked(feats, &|_| true).expect("at least one class")
    }

    /// The `n` most likely classes with probabilities, best first.
    pub fn top_n(&self, feats: &[String], n: usize) -> Vec<(&str, f64)> {
        let p = self.predict_proba(feats);
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|a, b| p[*b].total_cmp(&p[*a]).then(a.cmp(b)));
        idx.into_iter().take(n).map(|i| (self.classes[i].as_str(), p[i])).collect()
    }

    pub fn to_json(&self) -> String {
        let k = self.classes.len();
        let weights = self
            .features
            .names()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), self.weights[i * k..i * k + k].to_vec()))
            .collect();
        serde_json::to_string(&SoftmaxJson {
            kind: "softmax".into(),
            classes: self.classes.clone(),
            bias: self.bias.clone(),
            weights,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Softmax, LearnError> {
        let j: SoftmaxJson = serde_json::from_str(text).map_err(|e| LearnError::DimensionMismatch(e.to_string()))?;
        let k = j.classes.len();
        if j.bias.len() != k {
            return Err(LearnError::DimensionMismatch("bias length".into()));
        }
        let mut names = Vec::new();
        let mut weights = Vec::new();
        for (n, row) in j.weights {
            if row.len() != k {
                return Err(LearnError::DimensionMismatch(format!("weights for `{n}`")));
            }
            names.push(n);
            weights.extend(row);
        }
        Ok(Softmax {
            classes: j.classes,
            features: Interner::from_names(names),
            weights,
            bias: j.bias,
            loss_history: vec![],
        })
    }
}

/// Scores each candidate by `w · φ(candidate)` and normalizes over the
/// candidate list; selects only indices present in the list.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointer {
    features: Interner,
    weights: Vec<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointerJson {
    kind: String,
    weights: BTreeMap<String, f64>,
}

impl Pointer {
    /// Each group is (candidate feature lists, gold index).
    pub fn train(groups: &[(Vec<Vec<String>>, usize)], cfg: &TrainConfig) -> Result<Pointer, LearnError> {
        if groups.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let mut features = Interner::default();
        let mut xs = Vec::with_capacity(groups.len());
        for (cands, gold) in groups {
            if *gold >= cands.len() {
                return Err(LearnError::DimensionMismatch(format!("gold {gold} of {} candidates", cands.len())));
            }
            xs.push((cands.iter().map(|c| features.intern_all(c)).collect::<Vec<_>>(), *gold));
        }
        let n = xs.len() as f64;
        let l2 = cfg.l2;
        let objective = |w: &[f64], grad: &mut [f64]| -> f64 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for (cands, gold) in &xs {
                let mut z: Vec<f64> = cands.iter().map(|c| c.iter().map(|&f| w[f as usize]).sum()).collect();
                log_softmax_inplace(&mut z);
                loss -= z[*gold];
                for (i, c) in cands.iter().enumerate() {
                    let p = (z[i].exp() - if i == *gold { 1.0 } else { 0.0 }) / n;
                    for &f in c {
                        grad[f as usize] += p;
                    }
                }
            }
            let mut reg = 0.0;
            for (g, v) in grad.iter_mut().zip(w) {
                reg += v * v;
                *g += l2 * v;
            }
            loss / n + 0.5 * l2 * reg
        };
        let (weights, history) = minimize(&objective, vec![0.0; features.len()], cfg.max_iters, cfg.tol);
        Ok(Pointer { features, weights, loss_history: history })
    }

    pub fn scores(&self, cands: &[Vec<String>]) -> Vec<f64> {
        cands.iter().map(|c| self.features.lookup(c).iter().map(|&f| self.weights[f as usize]).sum()).collect()
    }

    /// Index of the best candidate (ties → lowest index); None if empty.
    pub fn choose(&self, cands: &[Vec<String>]) -> Option<usize> {
        let z = self.scores(cands);
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in z.into_iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn to_json(&self) -> String {
        let weights = self.features.names().iter().cloned().zip(self.weights.iter().copied()).collect();
        serde_json::to_string(&PointerJson { kind: "pointer".into(), weights }).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Pointer, LearnError> {
        let j: PointerJson = serde_json::from_str(text).map_err(|e| LearnError::DimensionMismatch(e.to_string()))?;
        let (names, weights): (Vec<String>, Vec<f64>) = j.weights.into_iter().unzip();
        Ok(Pointer { features: Interner::from_names(names), weights, loss_history: vec![] })
    }
}

/// Lower-case, punctuation-split tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' || c == '\'' {
            cur.extend(c.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Unigram and bigram features of a token list.
pub fn ngram_features(tokens: &[String]) -> Vec<String> {
    let mut f: Vec<String> = tokens.iter().map(|t| format!("w={t}")).collect();
    f.extend(tokens.windows(2).map(|w| format!("b={}_{}", w[0], w[1])));
    f
}
