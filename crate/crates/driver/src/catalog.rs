//! The six benchmark kernels with their inputs, gradient targets and default storage.

use sdqlite::autodiff::{tangent_type, FadError};
use sdqlite::lang::{parse_source, parse_type, type_of, Expr, Mode, Type, TypeEnv};
use sdqlite::opt::{StorageError, StorageSpec};

#[derive(Debug, Clone, Copy)]
pub struct KernelEntry {
    pub name: &'static str,
    pub source: &'static str,
    /// Inputs and their logical types, in declaration order.
    pub inputs: &'static [(&'static str, &'static str)],
    pub wrt: &'static str,
    pub specs: &'static str,
    /// Type of the term itself.
    pub result: &'static str,
}

pub const CATALOG: [KernelEntry; 6] = [
    KernelEntry {
        name: "BATAX",
        source: "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }",
        inputs: &[("A", "tensor 2"), ("X", "tensor 1"), ("beta", "real")],
        wrt: "X",
        specs: "A = csr, X = dense",
        result: "tensor 1",
    },
    KernelEntry {
        name: "SMMM",
        source: "sum(<i, r> in A) sum(<k, v> in r) sum(<j, w> in B(k)) v * w",
        inputs: &[("A", "tensor 2"), ("B", "tensor 2")],
        wrt: "B",
        specs: "A = csr, B = dense_row",
        result: "real",
    },
    KernelEntry {
        name: "SMVM",
        source: "sum(<i, r> in A) sum(<j, v> in r) v * X(j)",
        inputs: &[("A", "tensor 2"), ("X", "tensor 1")],
        wrt: "X",
        specs: "A = csr, X = dense",
        result: "real",
    },
    KernelEntry {
        name: "VVA",
        source: "V1 + V2",
        inputs: &[("V1", "tensor 1"), ("V2", "tensor 1")],
        wrt: "V1",
        specs: "V1 = dense, V2 = coo",
        result: "tensor 1",
    },
    KernelEntry {
        name: "VVD",
        source: "sum(<i, a> in V2) V1(i) * a",
        inputs: &[("V1", "tensor 1"), ("V2", "tensor 1")],
        wrt: "V1",
        specs: "V1 = dense, V2 = coo",
        result: "real",
    },
    KernelEntry {
        name: "VSM",
        source: "sum(<i, v> in V) { i -> v * s * s }",
        inputs: &[("V", "tensor 1"), ("s", "real")],
        wrt: "s",
        specs: "V = coo",
        result: "tensor 1",
    },
];

/// Default value of BATAX's scale factor.
pub const BETA: f64 = 1.5;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown kernel `{0}`; expected one of BATAX, SMMM, SMVM, VVA, VVD, VSM")]
    Unknown(String),
    #[error("kernel {kernel}: {msg}")]
    Invalid { kernel: &'static str, msg: String },
}

pub fn lookup(name: &str) -> Result<&'static KernelEntry, CatalogError> {
    CATALOG
        .iter()
        .find(|k| k.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| CatalogError::Unknown(name.into()))
}

impl KernelEntry {
    fn invalid(&self, msg: impl ToString) -> CatalogError {
        CatalogError::Invalid {
            kernel: self.name,
            msg: msg.to_string(),
        }
    }

    pub fn term(&self) -> Expr {
        parse_source(self.source, Mode::Logical).expect("catalog sources parse")
    }

    pub fn env(&self) -> TypeEnv {
        self.inputs
            .iter()
            .map(|(x, t)| (*x, parse_type(t).expect("catalog types parse")))
            .collect()
    }

    pub fn default_specs(&self) -> Result<Vec<StorageSpec>, StorageError> {
        StorageSpec::parse_list(self.specs)
    }

    /// Type of the gradient with respect to `wrt`: the result type tensored with the input's.
    pub fn gradient_type(&self, wrt: &str) -> Result<Type, FadError> {
        let env = self.env();
        let r = type_of(&env, &self.term())?;
        tangent_type(&r, env.get(wrt).ok_or_else(|| FadError::NotFree(wrt.into()))?)
    }

    /// Checks that the term has its declared type and the target is one of its inputs.
    pub fn check(&self) -> Result<(), CatalogError> {
        let e = parse_source(self.source, Mode::Logical).map_err(|e| self.invalid(e))?;
        let env = self.env();
        let t = type_of(&env, &e).map_err(|e| self.invalid(e))?;
        let want = parse_type(self.result).map_err(|e| self.invalid(e))?;
        if t != want {
            return Err(self.invalid(format!("has type {}, expected {}", t, want)));
        }
        if !sdqlite::lang::subst::free_vars(&e).contains(self.wrt) {
            return Err(self.invalid(format!("gradient target {} is not free in the term", self.wrt)));
        }
        self.default_specs().map_err(|e| self.invalid(e))?;
        Ok(())
    }
}

/// Checks every catalog entry; run once at startup.
pub fn check_catalog() -> Result<(), CatalogError> {
    CATALOG.iter().try_for_each(KernelEntry::check)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_well_typed() {
        check_catalog().unwrap();
    }

    #[test]
    fn gradient_types() {
        let t = |k: &str| {
            let e = lookup(k).unwrap();
            e.gradient_type(e.wrt).unwrap()
        };
        assert_eq!(t("BATAX"), Type::tensor(2));
        assert_eq!(t("SMMM"), Type::tensor(2));
        assert_eq!(t("VVA"), Type::tensor(2));
        assert_eq!(t("SMVM"), Type::tensor(1));
        assert_eq!(t("VVD"), Type::tensor(1));
        assert_eq!(t("VSM"), Type::tensor(1));
        assert!(lookup("vvd").is_ok() && lookup("nope").is_err());
    }
}
