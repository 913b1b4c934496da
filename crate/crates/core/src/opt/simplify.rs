//! Term-level `let` clean-up run before terms enter the e-graph.

use crate::lang::subst::{count_free, occurs_free, substitute};
use crate::lang::Expr;

/// Removes dead `let`s and inlines bindings that are atoms or used once
/// outside any loop of the body. Never duplicates work.
pub fn inline_lets(e: &Expr) -> Expr {
    match e {
        Expr::Let { var, bound, body } => {
            let bound = inline_lets(bound);
            let body = inline_lets(body);
            if !occurs_free(var, &body) {
                return body;
            }
            let cheap = matches!(
                bound,
                Expr::Var(_) | Expr::Real(_) | Expr::Int(_) | Expr::Bool(_) | Expr::EmptyDict
            );
            if cheap || (count_free(var, &body) == 1 && !used_in_loop(var, &body)) {
                return inline_lets(&substitute(&body, var, &bound));
            }
            Expr::let_in(var.clone(), bound, body)
        }
        other => other.clone().map_children(&mut |c| inline_lets(&c)),
    }
}

/// True when `x` occurs free inside the body of a `sum` of `e`.
fn used_in_loop(x: &str, e: &Expr) -> bool {
    match e {
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => used_in_loop(x, range) || (key != x && val != x && occurs_free(x, body)),
        Expr::Let { var, bound, body } => used_in_loop(x, bound) || (var != x && used_in_loop(x, body)),
        other => other.children().into_iter().any(|c| used_in_loop(x, c)),
    }
}
