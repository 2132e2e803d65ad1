use crate::error::Result;
use crate::tensor::{Graph, Real, Tensor, Var};

/// One direction's weights on a graph, gate blocks ordered `i, f, o, g`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    /// `[input × 4h]`
    pub w: Var,
    /// `[h × 4h]`
    pub u: Var,
    /// `[1 × 4h]`
    pub b: Var,
    pub hidden: usize,
}

impl LstmWeights {
    /// Fuses per-gate tensors (`w[k]`: `[input × h]`, `u[k]`: `[h × h]`,
    /// `b[k]`: `[h]`) into column blocks. Gradients flow back to each piece.
    pub fn fuse<T: Real>(g: &mut Graph<T>, w: [Var; 4], u: [Var; 4], b: [Var; 4]) -> Result<Self> {
        let hidden = g.value(u[0]).rows();
        let w = g.concat_cols(&w)?;
        let u = g.concat_cols(&u)?;
        let rows = b
            .iter()
            .map(|&v| g.reshape(v, vec![1, hidden]))
            .collect::<Result<Vec<_>>>()?;
        let b = g.concat_cols(&rows)?;
        Ok(LstmWeights { w, u, b, hidden })
    }
}

/// One LSTM step over a batch of rows:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmWeights,
) -> Result<(Var, Var)> {
    let h = p.hidden;
    let xw = g.matmul(x, p.w)?;
    let hu = g.matmul(h_prev, p.u)?;
    let z = g.add(xw, hu)?;
    let z = g.add_bias(z, p.b)?;
    let sig = g.slice_cols(z, 0, 3 * h)?;
    let sig = g.sigmoid(sig);
    let cand = g.slice_cols(z, 3 * h, h)?;
    let cand = g.tanh(cand);
    let i = g.slice_cols(sig, 0, h)?;
    let f = g.slice_cols(sig, h, h)?;
    let o = g.slice_cols(sig, 2 * h, h)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let squashed = g.tanh(c);
    let h_new = g.mul(o, squashed)?;
    Ok((h_new, c))
}

/// Runs both directions over `x` (`[batch·steps × input]`, batch-major,
/// right-padded). The forward direction reads `0..len`, the backward one
/// reads `len-1..=0`; padded steps emit zeros and leave the backward state
/// at zero until the last valid step is reached. Output is batch-major
/// `[batch·steps × 2h]` with the forward half first.
pub fn bilstm<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    lens: &[usize],
    steps: usize,
    fwd: &LstmWeights,
    bwd: &LstmWeights,
) -> Result<Var> {
    let batch = lens.len();
    let h = fwd.hidden;
    let zeros = g.constant(Tensor::zeros(&[batch, h]));
    let mut halves: [Vec<Option<Var>>; 2] = [vec![None; steps], vec![None; steps]];
    for (dir, weights) in [fwd, bwd].into_iter().enumerate() {
        let (mut h_t, mut c_t) = (zeros, zeros);
        let order: Box<dyn Iterator<Item = usize>> = if dir == 0 {
            Box::new(0..steps)
        } else {
            Box::new((0..steps).rev())
        };
        for t in order {
            let x_t = g.gather_rows(x, (0..batch).map(|b| Some(b * steps + t)).collect())?;
            let (h_new, c_new) = lstm_cell(g, x_t, h_t, c_t, weights)?;
            if lens.iter().all(|&l| t < l) {
                (h_t, c_t) = (h_new, c_new);
            } else {
                let mask: Vec<T> = lens
                    .iter()
                    .map(|&l| if t < l { T::one() } else { T::zero() })
                    .collect();
                h_t = g.scale_rows(h_new, mask.clone())?;
                c_t = g.scale_rows(c_new, mask)?;
            }
            halves[dir][t] = Some(h_t);
        }
    }
    let per_step = (0..steps)
        .map(|t| g.concat_cols(&[halves[0][t].expect("visited"), halves[1][t].expect("visited")]))
        .collect::<Result<Vec<_>>>()?;
    let time_major = g.concat_rows(&per_step)?;
    let index = (0..batch * steps)
        .map(|r| Some((r % steps) * batch + r / steps))
        .collect();
    g.gather_rows(time_major, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::check_gradients;
    use approx::assert_relative_eq;

    fn fused(g: &mut Graph<f64>, v: &[Var]) -> Result<LstmWeights> {
        LstmWeights::fuse(g, [v[0], v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]], [v[8], v[9], v[10], v[11]])
    }

    fn gate_params(input: usize, h: usize, fill: impl Fn(usize, usize) -> f64) -> Vec<Tensor<f64>> {
        let mut out = Vec::new();
        for k in 0..4 {
            out.push(Tensor::new(vec![input, h], (0..input * h).map(|i| fill(k, i)).collect()).unwrap());
        }
        for k in 0..4 {
            out.push(Tensor::new(vec![h, h], (0..h * h).map(|i| fill(k + 4, i)).collect()).unwrap());
        }
        for k in 0..4 {
            out.push(Tensor::new(vec![h], (0..h).map(|i| fill(k + 8, i)).collect()).unwrap());
        }
        out
    }

    fn wavy(k: usize, i: usize) -> f64 {
        ((k * 31 + i * 7) as f64 * 0.37).sin() * 0.6
    }

    #[test]
    fn zero_weights_and_state_give_zero() {
        let mut g = Graph::new();
        let v: Vec<Var> = gate_params(3, 2, |_, _| 0.0).into_iter().map(|t| g.constant(t)).collect();
        let p = fused(&mut g, &v).unwrap();
        let x = g.constant(Tensor::zeros(&[1, 3]));
        let z = g.constant(Tensor::zeros(&[1, 2]));
        let (h, c) = lstm_cell(&mut g, x, z, z, &p).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0]);
        assert_eq!(g.value(c).data(), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_matches_closed_form() {
        // Forget bias 10, everything else random: compare with a direct
        // scalar evaluation of the gate equations.
        let (input, h) = (2, 2);
        let mut params = gate_params(input, h, wavy);
        params[9] = Tensor::full(&[h], 10.0);
        let x = [0.3, -0.8];
        let h_prev = [0.1, -0.4];
        let c_prev = [1.5, -2.0];

        let mut g = Graph::new();
        let v: Vec<Var> = params.iter().cloned().map(|t| g.constant(t)).collect();
        let p = fused(&mut g, &v).unwrap();
        let xv = g.constant(Tensor::matrix(1, input, x.to_vec()).unwrap());
        let hv = g.constant(Tensor::matrix(1, h, h_prev.to_vec()).unwrap());
        let cv = g.constant(Tensor::matrix(1, h, c_prev.to_vec()).unwrap());
        let (h_out, c_out) = lstm_cell(&mut g, xv, hv, cv, &p).unwrap();

        let pre = |k: usize, j: usize| {
            let mut s = params[8 + k].data()[j];
            for a in 0..input {
                s += x[a] * params[k].get(a, j);
            }
            for a in 0..h {
                s += h_prev[a] * params[4 + k].get(a, j);
            }
            s
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for j in 0..h {
            let (i, f, o, gg) = (sig(pre(0, j)), sig(pre(1, j)), sig(pre(2, j)), pre(3, j).tanh());
            assert!(f > 0.9999);
            let c = f * c_prev[j] + i * gg;
            assert_relative_eq!(g.value(c_out).data()[j], c, max_relative = 1e-12);
            assert_relative_eq!(g.value(h_out).data()[j], o * c.tanh(), max_relative = 1e-12);
            // Saturation limit: the cell keeps its memory and adds i·g.
            assert!((c - (c_prev[j] + i * gg)).abs() < 1e-3);
        }
    }

    #[test]
    fn three_unrolled_steps_pass_gradient_check() {
        let (input, h) = (3, 2);
        let mut inputs = gate_params(input, h, wavy);
        inputs.push(Tensor::new(vec![3, input], (0..9).map(|i| (i as f64 * 0.9).cos()).collect()).unwrap());
        let report = check_gradients(&inputs, |g, v| {
            let p = fused(g, v)?;
            let z = g.constant(Tensor::zeros(&[1, h]));
            let (mut hh, mut cc) = (z, z);
            for t in 0..3 {
                let x_t = g.gather_rows(v[12], vec![Some(t)])?;
                (hh, cc) = lstm_cell(g, x_t, hh, cc, &p)?;
            }
            g.concat_cols(&[hh, cc])
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
