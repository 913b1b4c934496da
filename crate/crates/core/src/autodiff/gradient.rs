//! The gradient macro: seeds every free variable with its input tangent and
//! differentiates once with tensorized forward mode.

use alloc::vec::Vec;

use super::anf::to_anf;
use super::fad::{fad_tensor, tangent, tangent_type, FadConfig, FadError};
use crate::lang::subst::{free_vars, FreshNamer};
use crate::lang::{zero_of, Expr, Name, Type, TypeEnv, TypeError};

/// `onehot[τ] x`: the identity tensor over the stored keys of `x`.
///
/// `real` gives `1.0`; `tensor n` gives `sum(<i1, r1> in x) ...
/// sum(<in, _> in r(n-1)) {i1 -> ... {in -> {i1 -> ... {in -> 1.0}}}}`.
pub fn onehot(x: &Expr, ty: &Type, namer: &mut FreshNamer) -> Result<Expr, FadError> {
    let n = match ty.order() {
        Some(n) if !ty.is_partial() => n,
        _ => return Err(TypeError::NotTensor(ty.clone()).into()),
    };
    if n == 0 {
        return Ok(Expr::Real(1.0));
    }
    let keys: Vec<Name> = (0..n).map(|_| namer.fresh_with("i")).collect();
    let vals: Vec<Name> = (0..n)
        .map(|l| if l + 1 == n { "_".into() } else { namer.fresh_with("r") })
        .collect();
    let mut body = keys
        .iter()
        .chain(&keys)
        .rev()
        .fold(Expr::Real(1.0), |acc, k| Expr::singleton(Expr::Var(k.clone()), acc));
    for l in (0..n).rev() {
        let range = if l == 0 {
            x.clone()
        } else {
            Expr::Var(vals[l - 1].clone())
        };
        body = Expr::sum(keys[l].clone(), vals[l].clone(), range, body);
    }
    Ok(body)
}

/// Input tangent of free variable `v`: the one-hot seed for `wrt`, zero otherwise.
fn ingrad(v: &str, ty: &Type, wrt: &str, tau: &Type, namer: &mut FreshNamer) -> Result<Expr, FadError> {
    if v == wrt {
        return onehot(&Expr::var(v), ty, namer);
    }
    if ty.is_discrete() {
        return Ok(Expr::Real(0.0));
    }
    Ok(zero_of(&tangent_type(ty, tau)?)?)
}

/// `gradient(e, wrt)`: a term of type `type(e) ⊗ type(wrt)` whose value is
/// the Jacobian of `e` with respect to `wrt` at the stored coordinates.
pub fn expand_gradient(e: &Expr, wrt: &str, env: &TypeEnv) -> Result<Expr, FadError> {
    let free = free_vars(e);
    if !free.contains(wrt) {
        return Err(FadError::NotFree(wrt.into()));
    }
    let tau = env
        .get(wrt)
        .ok_or_else(|| TypeError::Unbound(wrt.into()))?
        .clone();
    if !tau.is_tensor() || tau.is_partial() {
        return Err(FadError::NotTensor(wrt.into(), tau));
    }
    let cfg = FadConfig::new(tau.logical())?;
    let anf = to_anf(e);
    let mut namer = FreshNamer::avoiding(&anf);
    for (x, _) in env.iter() {
        namer.reserve(x);
    }
    let mut seeds = Vec::new();
    for v in &free {
        let ty = env.get(v).ok_or_else(|| TypeError::Unbound(v.clone()))?;
        seeds.push((tangent(v), ingrad(v, ty, wrt, &cfg.tau, &mut namer)?));
    }
    let body = fad_tensor(&cfg, env, &anf)?;
    Ok(seeds
        .into_iter()
        .rev()
        .fold(body, |acc, (x, b)| Expr::let_in(x, b, acc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::subst::alpha_eq;
    use crate::lang::{parse, type_of, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Logical).unwrap()
    }

    #[test]
    fn dot_product_gradient_listing() {
        let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
        let g = expand_gradient(&p("sum(<i, a> in V1) a * V2(i)"), "V2", &env).unwrap();
        let expected = p(
            "let V1' = { } in
             let V2' = sum(<i, _> in V2) { i -> { i -> 1.0 } } in
             sum(<i, a> in V1) let i' = 0.0 in let a' = V1'(i) in a * V2'(i) + a' * V2(i)",
        );
        assert!(alpha_eq(&g, &expected), "{}", g);
        assert_eq!(type_of(&env, &g), Ok(Type::tensor(1)));
    }

    #[test]
    fn scalar_seed() {
        let env: TypeEnv = [("x", Type::Real), ("y", Type::Real)].into_iter().collect();
        let g = expand_gradient(&p("x * y"), "x", &env).unwrap();
        assert!(alpha_eq(&g, &p("let x' = 1.0 in let y' = 0.0 in x * y' + x' * y")), "{}", g);
    }

    #[test]
    fn matrix_seed_is_order_four_identity() {
        let env: TypeEnv = [("M", Type::tensor(2))].into_iter().collect();
        let g = expand_gradient(&p("sum(<i, r> in M) r(i)"), "M", &env).unwrap();
        assert_eq!(type_of(&env, &g), Ok(Type::tensor(2)));
    }

    #[test]
    fn discrete_inputs_get_zero() {
        let env: TypeEnv = [("n", Type::Int), ("V", Type::tensor(1))].into_iter().collect();
        let g = expand_gradient(&p("V(n)"), "V", &env).unwrap();
        assert!(alpha_eq(
            &g,
            &p("let V' = sum(<i1, _> in V) { i1 -> { i1 -> 1.0 } } in let n' = 0.0 in V'(n)")
        ), "{}", g);
    }

    #[test]
    fn errors() {
        let env: TypeEnv = [("x", Type::Real), ("n", Type::Int)].into_iter().collect();
        assert_eq!(expand_gradient(&p("x"), "y", &env), Err(FadError::NotFree("y".into())));
        assert!(matches!(expand_gradient(&p("x * n"), "n", &env), Err(FadError::NotTensor(..))));
    }
}
