//! Random well-typed logical terms and inputs for property checks.

use rand::seq::SliceRandom;
use rand::Rng;
use sdqlite::interp::{Env, Value};
use sdqlite::lang::{Expr, Name, Type, TypeEnv};

/// Side length of fuzzed tensors; keys range over `0..DIM`.
pub const DIM: i64 = 4;

/// Free variables available to generated terms.
pub const INPUTS: [(&str, usize); 6] = [("s", 0), ("t", 0), ("V", 1), ("W", 1), ("A", 2), ("B", 2)];

pub fn input_env() -> TypeEnv {
    INPUTS.iter().map(|&(x, n)| (x, Type::tensor(n))).collect()
}

/// Generates terms of order 0, 1 or 2 (real, vector, matrix).
pub struct TermGen<'r, R: Rng> {
    rng: &'r mut R,
    /// Variables in scope with their tensor order; `None` marks an integer.
    scope: Vec<(Name, Option<usize>)>,
    fresh: usize,
}

impl<'r, R: Rng> TermGen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        TermGen {
            rng,
            scope: INPUTS.iter().map(|&(x, n)| (x.to_string(), Some(n))).collect(),
            fresh: 0,
        }
    }

    /// A term of tensor order `order` with nesting at most `depth`.
    pub fn term(&mut self, order: usize, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_ratio(1, 5) {
            return self.leaf(order);
        }
        let d = depth - 1;
        let choice = self.rng.gen_range(0..8);
        match (order, choice) {
            (_, 0) => Expr::add(self.term(order, d), self.term(order, d)),
            (0, 1) => Expr::mul(self.term(0, d), self.term(0, d)),
            (_, 1) => {
                let (a, b) = (self.term(0, d), self.term(order, d));
                if self.rng.gen() {
                    Expr::mul(a, b)
                } else {
                    Expr::mul(b, a)
                }
            }
            (2, 2) => Expr::mul(self.term(1, d), self.term(1, d)),
            (0, 2) => Expr::unary(*["sin", "cos"].choose(self.rng).unwrap(), self.term(0, d)),
            (_, 2) => Expr::singleton(self.key(), self.term(order - 1, d)),
            (_, 3) => {
                let k = self.key();
                Expr::lookup(self.term(order + 1, d.min(1)), k)
            }
            (_, 4) => self.sum(order, d),
            (_, 5) => {
                let bound_order = self.rng.gen_range(0..3);
                let bound = self.term(bound_order, d);
                let x = self.name("x");
                self.scoped(&[(x.clone(), Some(bound_order))], |g| Expr::let_in(x.clone(), bound, g.term(order, d)))
            }
            (_, 6) => {
                let c = self.cond();
                Expr::if_then(c, self.term(order, d))
            }
            _ => self.sum(order, d),
        }
    }

    /// `sum(<k, v> in range) body`, with the body a singleton keyed by `k`
    /// half of the time when the result is a tensor.
    fn sum(&mut self, order: usize, d: usize) -> Expr {
        let range_order = self.rng.gen_range(1..3);
        let range = self.term(range_order, d.min(1));
        let (k, v) = (self.name("i"), self.name("v"));
        let binds = [(k.clone(), None), (v.clone(), Some(range_order - 1))];
        self.scoped(&binds, |g| {
            let body = if order > 0 && g.rng.gen() {
                Expr::singleton(Expr::var(k.clone()), g.term(order - 1, d))
            } else {
                g.term(order, d)
            };
            Expr::sum(k.clone(), v.clone(), range, body)
        })
    }

    fn leaf(&mut self, order: usize) -> Expr {
        let vars: Vec<Name> = self
            .scope
            .iter()
            .filter(|(_, o)| *o == Some(order))
            .map(|(x, _)| x.clone())
            .collect();
        if order == 0 && (vars.is_empty() || self.rng.gen_ratio(1, 4)) {
            return Expr::Real(*[0.5, 1.5, 2.0, -1.0, 3.0].choose(self.rng).unwrap());
        }
        match vars.choose(self.rng) {
            Some(x) => Expr::var(x.clone()),
            None => Expr::singleton(self.key(), self.leaf(order - 1)),
        }
    }

    fn key(&mut self) -> Expr {
        let ints: Vec<Name> = self.scope.iter().filter(|(_, o)| o.is_none()).map(|(x, _)| x.clone()).collect();
        match ints.choose(self.rng) {
            Some(i) if self.rng.gen_ratio(2, 3) => Expr::var(i.clone()),
            _ => Expr::Int(self.rng.gen_range(0..DIM)),
        }
    }

    fn cond(&mut self) -> Expr {
        let c = Expr::eq(self.key(), self.key());
        if self.rng.gen_ratio(1, 3) {
            Expr::not(c)
        } else {
            c
        }
    }

    fn name(&mut self, base: &str) -> Name {
        self.fresh += 1;
        format!("{}{}", base, self.fresh)
    }

    fn scoped<T>(&mut self, binds: &[(Name, Option<usize>)], f: impl FnOnce(&mut Self) -> T) -> T {
        let mark = self.scope.len();
        self.scope.extend(binds.iter().cloned());
        let r = f(self);
        self.scope.truncate(mark);
        r
    }
}

fn nonzero(rng: &mut impl Rng) -> f64 {
    let x = rng.gen_range(0.1..2.0);
    if rng.gen() {
        x
    } else {
        -x
    }
}

/// A tensor of side `DIM`; each coordinate stored with probability `density`.
pub fn random_tensor(rng: &mut impl Rng, order: usize, density: f64) -> Value {
    if order == 0 {
        return Value::Real(nonzero(rng));
    }
    Value::dict((0..DIM).filter_map(|k| {
        let v = if order == 1 {
            rng.gen_bool(density).then(|| Value::Real(nonzero(rng)))
        } else {
            Some(random_tensor(rng, order - 1, density)).filter(|v| !v.is_zero())
        };
        v.map(|v| (k, v))
    }))
}

/// Values for [`INPUTS`]; names in `full` get every coordinate.
pub fn random_env(rng: &mut impl Rng, full: &[&str]) -> Env {
    let mut env = Env::new();
    for &(x, n) in &INPUTS {
        let density = if full.contains(&x) { 1.0 } else { 0.6 };
        env.bind(x, Type::tensor(n), random_tensor(rng, n, density));
    }
    env
}
