//! Scalar reverse-mode differentiation over a Wengert list.
//!
//! Every node records its value and the local partial derivatives with
//! respect to at most two parents at construction time, so the backward
//! sweep is a single reverse pass accumulating adjoints. Loss heads are
//! written against [`Tape`]; the dense layers underneath are differentiated
//! by hand in [`crate::nn`] and fed the adjoints of the network outputs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, parents: [(usize, f64); 2], arity: u8) -> Var {
        self.nodes.push(Node { value, parents, arity });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose adjoint will be reported by [`Tape::backward`].
    pub fn var(&mut self, value: f64) -> Var {
        self.push(value, [(0, 0.0); 2], 0)
    }

    /// A leaf treated as a constant; identical to [`Tape::var`] but reads better at call sites.
    pub fn constant(&mut self, value: f64) -> Var {
        self.var(value)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    fn unary(&mut self, x: Var, value: f64, dx: f64) -> Var {
        self.push(value, [(x.0, dx), (0, 0.0)], 1)
    }

    fn binary(&mut self, x: Var, y: Var, value: f64, dx: f64, dy: f64) -> Var {
        self.push(value, [(x.0, dx), (y.0, dy)], 2)
    }

    pub fn add(&mut self, x: Var, y: Var) -> Var {
        let v = self.value(x) + self.value(y);
        self.binary(x, y, v, 1.0, 1.0)
    }

    pub fn sub(&mut self, x: Var, y: Var) -> Var {
        let v = self.value(x) - self.value(y);
        self.binary(x, y, v, 1.0, -1.0)
    }

    pub fn mul(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        self.binary(x, y, a * b, b, a)
    }

    pub fn div(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        self.binary(x, y, a / b, 1.0 / b, -a / (b * b))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let v = -self.value(x);
        self.unary(x, v, -1.0)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x) * c;
        self.unary(x, v, c)
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x) + c;
        self.unary(x, v, 1.0)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let a = self.value(x);
        self.unary(x, a * a, 2.0 * a)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let e = self.value(x).exp();
        self.unary(x, e, e)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let a = self.value(x);
        self.unary(x, a.ln(), 1.0 / a)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x).tanh();
        self.unary(x, t, 1.0 - t * t)
    }

    /// Ties route the gradient to `x`.
    pub fn min(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        if a <= b {
            self.binary(x, y, a, 1.0, 0.0)
        } else {
            self.binary(x, y, b, 0.0, 1.0)
        }
    }

    /// Ties route the gradient to `x`.
    pub fn max(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        if a >= b {
            self.binary(x, y, a, 1.0, 0.0)
        } else {
            self.binary(x, y, b, 0.0, 1.0)
        }
    }

    /// Zero gradient outside `[lo, hi]`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let a = self.value(x);
        if a < lo {
            self.unary(x, lo, 0.0)
        } else if a > hi {
            self.unary(x, hi, 0.0)
        } else {
            self.unary(x, a, 1.0)
        }
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &x| self.add(acc, x)),
        }
    }

    pub fn mean(&mut self, xs: &[Var]) -> Var {
        let s = self.sum(xs);
        self.scale(s, 1.0 / xs.len().max(1) as f64)
    }

    /// Adjoints d(root)/d(node) for every node on the tape.
    pub fn backward(&self, root: Var) -> Vec<f64> {
        let mut adjoint = vec![0.0; self.nodes.len()];
        adjoint[root.0] = 1.0;
        for i in (0..=root.0).rev() {
            let g = adjoint[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for &(p, d) in &node.parents[..node.arity as usize] {
                adjoint[p] += g * d;
            }
        }
        adjoint
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let x = t.var(3.0);
        let y = t.var(4.0);
        let xy = t.mul(x, y);
        let z = t.add(xy, x);
        let adj = t.backward(z);
        assert_eq!(t.value(z), 15.0);
        assert_eq!(adj[x.index()], 5.0);
        assert_eq!(adj[y.index()], 3.0);
    }

    #[test]
    fn reused_node_accumulates() {
        let mut t = Tape::new();
        let x = t.var(2.0);
        let e = t.exp(x);
        let l = t.ln(e);
        let s = t.mul(l, l);
        let adj = t.backward(s);
        assert!((adj[x.index()] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn min_and_clamp_route_gradients() {
        let mut t = Tape::new();
        let x = t.var(1.5);
        let c = t.clamp(x, 0.8, 1.2);
        let adj = t.backward(c);
        assert_eq!(adj[x.index()], 0.0);

        let mut t = Tape::new();
        let x = t.var(0.3);
        let y = t.var(0.7);
        let m = t.min(x, y);
        let adj = t.backward(m);
        assert_eq!((adj[x.index()], adj[y.index()]), (1.0, 0.0));
    }
}
