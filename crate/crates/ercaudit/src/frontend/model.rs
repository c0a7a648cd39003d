//! Flattened contract model: single-inheritance resolution plus implicit
//! getters for public storage fields.

use crate::frontend::ast::*;
use crate::rule_ir::{ParamDecl, Signature};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no contract found in source")]
    Empty,
    #[error("contract `{0}` not found")]
    UnknownContract(String),
    #[error("contract `{child}` inherits unknown parent `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error("contract `{0}` has more than one parent; only single inheritance is supported")]
    MultipleInheritance(String),
    #[error("inheritance cycle involving `{0}`")]
    InheritanceCycle(String),
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
}

/// A contract with its inheritance chain flattened and public-field getters
/// materialized.
#[derive(Debug, Clone)]
pub struct ContractModel {
    pub name: String,
    pub fields: Vec<FieldAst>,
    pub events: Vec<Signature>,
    pub functions: Vec<FunctionAst>,
    pub modifiers: Vec<ModifierAst>,
}

impl ContractModel {
    pub fn field(&self, name: &str) -> Option<&FieldAst> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionAst> {
        self.functions.iter().find(|f| f.sig.name == name)
    }

    pub fn event(&self, name: &str) -> Option<&Signature> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierAst> {
        self.modifiers.iter().find(|m| m.name == name)
    }

    /// Externally callable functions, in declaration order.
    pub fn entry_functions(&self) -> impl Iterator<Item = &FunctionAst> {
        self.functions
            .iter()
            .filter(|f| f.visibility.is_entry() && f.sig.name != "__constructor")
    }
}

/// Flatten `root` (or the last contract in the file when `root` is `None`)
/// over its inheritance chain. Child declarations shadow parent declarations
/// of the same name; fields must not collide.
pub fn build_model(contracts: &[ContractAst], root: Option<&str>) -> Result<ContractModel, ModelError> {
    let by_name: BTreeMap<&str, &ContractAst> = contracts.iter().map(|c| (c.name.as_str(), c)).collect();
    let root = match root {
        Some(n) => *by_name
            .get(n)
            .ok_or_else(|| ModelError::UnknownContract(n.to_string()))?,
        None => contracts.last().ok_or(ModelError::Empty)?,
    };

    // walk the chain root -> parent -> grandparent ...
    let mut chain = vec![root];
    let mut cur = root;
    while !cur.parents.is_empty() {
        if cur.parents.len() > 1 {
            return Err(ModelError::MultipleInheritance(cur.name.clone()));
        }
        let pname = &cur.parents[0];
        let parent = *by_name.get(pname.as_str()).ok_or_else(|| ModelError::UnknownParent {
            child: cur.name.clone(),
            parent: pname.clone(),
        })?;
        if chain.iter().any(|c| c.name == parent.name) {
            return Err(ModelError::InheritanceCycle(parent.name.clone()));
        }
        chain.push(parent);
        cur = parent;
    }

    // base-most first so child declarations land later and can shadow
    let mut model = ContractModel {
        name: root.name.clone(),
        fields: Vec::new(),
        events: Vec::new(),
        functions: Vec::new(),
        modifiers: Vec::new(),
    };
    for c in chain.iter().rev() {
        for f in &c.fields {
            if model.fields.iter().any(|e| e.name == f.name) {
                return Err(ModelError::DuplicateField(f.name.clone()));
            }
            model.fields.push(f.clone());
        }
        for e in &c.events {
            model.events.retain(|x| x.name != e.name);
            model.events.push(e.clone());
        }
        for m in &c.modifiers {
            model.modifiers.retain(|x| x.name != m.name);
            model.modifiers.push(m.clone());
        }
        for f in &c.functions {
            model.functions.retain(|x| x.sig.name != f.sig.name);
            model.functions.push(f.clone());
        }
    }

    // implicit getters for public fields that are not shadowed by a function
    let getters: Vec<FunctionAst> = model
        .fields
        .iter()
        .filter(|f| f.visibility == Visibility::Public)
        .filter(|f| model.function(&f.name).is_none())
        .map(synth_getter)
        .collect();
    model.functions.extend(getters);
    Ok(model)
}

/// Build the compiler-generated getter for a public field: scalar fields get
/// a zero-argument view function, mappings take one parameter per key.
fn synth_getter(field: &FieldAst) -> FunctionAst {
    let span = field.span;
    let dummy = |i: usize| format!("arg{i}");
    let (params, ret_expr) = match &field.ty {
        FieldType::Elem(_) => (Vec::new(), Expr::Name(field.name.clone(), span)),
        FieldType::Mapping { keys, .. } => {
            let params: Vec<ParamDecl> = keys
                .iter()
                .enumerate()
                .map(|(i, ty)| ParamDecl {
                    ty: ty.clone(),
                    name: Some(dummy(i)),
                    indexed: false,
                })
                .collect();
            let key_exprs: Vec<Expr> = (0..keys.len()).map(|i| Expr::Name(dummy(i), span)).collect();
            (
                params,
                Expr::Index {
                    name: field.name.clone(),
                    keys: key_exprs,
                    span,
                },
            )
        }
    };
    FunctionAst {
        sig: Signature {
            name: field.name.clone(),
            params,
            returns: vec![field.ty.value_type().clone()],
            is_event: false,
        },
        visibility: Visibility::External,
        modifiers: Vec::new(),
        is_view: true,
        is_pure: false,
        body: Some(Block {
            stmts: vec![Stmt::Return {
                value: Some(ret_expr),
                span,
            }],
        }),
        unsupported: None,
        span,
    }
}

/// Types of the implicit getter a public field would generate, used when
/// matching required interface declarations against a contract.
pub fn getter_signature(field: &FieldAst) -> Signature {
    let f = synth_getter(field);
    f.sig
}
