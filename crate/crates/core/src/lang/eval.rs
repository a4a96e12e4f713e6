use thiserror::Error;

use super::ast::DictExpr;
use super::workspace::Workspace;
use crate::dictionary::{Bindings, DictError, Dictionary, Family};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("`{0}` is not a family")]
    NotFamily(String),
    #[error("family `{family}` takes {expected} parameters, got {got}")]
    Arity { family: String, expected: usize, got: usize },
    #[error("family `{family}` is declared over ({expected}), not ({got})")]
    ParamMismatch { family: String, expected: String, got: String },
    #[error(transparent)]
    Dict(#[from] DictError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Dict(Dictionary),
    Family(Family),
}

impl Value {
    /// A family is flattened wherever a plain dictionary is required.
    pub fn into_dict(self) -> Dictionary {
        match self {
            Value::Dict(d) => d,
            Value::Family(f) => f.flatten(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Value::Dict(d) => &d.name,
            Value::Family(f) => &f.base_name,
        }
    }
}

/// Evaluation environment: a workspace plus optional instance bindings that restrict
/// declared families and filter plain dictionaries.
pub struct Env<'a> {
    pub ws: &'a Workspace,
    pub bindings: Option<&'a Bindings>,
}

impl<'a> Env<'a> {
    pub fn new(ws: &'a Workspace) -> Self {
        Env { ws, bindings: None }
    }

    pub fn with_bindings(ws: &'a Workspace, bindings: &'a Bindings) -> Self {
        Env {
            ws,
            bindings: Some(bindings),
        }
    }

    fn family(&self, f: &Family) -> Family {
        match self.bindings {
            Some(b) => f.restrict(b, &self.ws.aliases),
            None => f.clone(),
        }
    }

    fn dict(&self, d: &Dictionary) -> Dictionary {
        match self.bindings {
            Some(b) => d.filter_compatible(b, &self.ws.aliases),
            None => d.clone(),
        }
    }

    pub fn eval(&self, expr: &DictExpr) -> Result<Value, EvalError> {
        match expr {
            DictExpr::Name(n) => {
                if let Some(d) = self.ws.dictionaries.get(n) {
                    Ok(Value::Dict(self.dict(d)))
                } else if let Some(f) = self.ws.families.get(n) {
                    Ok(Value::Family(self.family(f)))
                } else {
                    Err(EvalError::UnboundName(n.clone()))
                }
            }
            DictExpr::Binary(op, l, r) => {
                let l = self.eval_dict(l)?;
                let r = self.eval_dict(r)?;
                Ok(Value::Dict(Dictionary::binary(*op, &l, &r)?))
            }
            DictExpr::Order(kind, e) => Ok(Value::Dict(Dictionary::order(*kind, &self.eval_dict(e)?)?)),
            DictExpr::Hierarchy(base, params) => {
                let params: Vec<Dictionary> = params.iter().map(|p| self.eval_dict(p)).collect::<Result<_, _>>()?;
                match self.ws.families.get(base) {
                    Some(f) => {
                        if f.params.len() != params.len() {
                            return Err(EvalError::Arity {
                                family: base.clone(),
                                expected: f.params.len(),
                                got: params.len(),
                            });
                        }
                        let got: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
                        if got != f.param_names() {
                            return Err(EvalError::ParamMismatch {
                                family: base.clone(),
                                expected: f.param_names().join(", "),
                                got: got.join(", "),
                            });
                        }
                        Ok(Value::Family(self.family(f)))
                    }
                    None if self.ws.dictionaries.contains_key(base) => Err(EvalError::NotFamily(base.clone())),
                    None => Ok(Value::Family(Family::hierarchy(base.clone(), params, None)?)),
                }
            }
            DictExpr::Collapse(op, e, kept) => {
                let f = self.eval_family(e)?;
                let kept: Vec<&str> = kept.iter().map(String::as_str).collect();
                Ok(Value::Family(f.collapse(*op, &kept)?))
            }
            DictExpr::Expand(e, sections) => {
                let f = self.eval_family(e)?;
                let sections: Vec<&str> = sections.iter().map(String::as_str).collect();
                Ok(Value::Dict(f.expand(&sections)?))
            }
        }
    }

    pub fn eval_dict(&self, expr: &DictExpr) -> Result<Dictionary, EvalError> {
        self.eval(expr).map(Value::into_dict)
    }

    pub fn eval_family(&self, expr: &DictExpr) -> Result<Family, EvalError> {
        match self.eval(expr)? {
            Value::Family(f) => Ok(f),
            Value::Dict(d) => Err(EvalError::NotFamily(d.name)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Genesis;
    use crate::lang::parse_expr;
    use crate::lang::workspace::{parse_workspace, Source};

    const PERSONNEL: &str = "\
universe DEPARTMENT : string { IT, HR }
universe BRANCH : string { USA, Can, EMU }
universe PERSONAL : string { Person1, Person2, Person3, Person4, Person5 }
universe QUARTERS : natural { 1, 2, 3, 4 }
dict D from DEPARTMENT { IT, HR }
dict B from BRANCH { USA, Can, EMU }
dict Q from QUARTERS { 1, 2, 3, 4 }
family P(D, B) from PERSONAL
member P(IT, USA) from PERSONAL { Person1, Person2 }
member P(IT, Can) from PERSONAL { Person3 }
member P(HR, USA) from PERSONAL { Person4 }
member P(HR, EMU) from PERSONAL { Person5 }
";

    fn ws() -> Workspace {
        parse_workspace(&[Source::new("personnel.ddr", PERSONNEL)]).unwrap().workspace
    }

    fn eval(ws: &Workspace, src: &str) -> Result<Value, EvalError> {
        Env::new(ws).eval(&parse_expr(src).unwrap())
    }

    #[test]
    fn idempotent_union() {
        let ws = ws();
        let d = eval(&ws, "D union D").unwrap().into_dict();
        assert_eq!(d.entries, ws.dictionaries["D"].entries);
    }

    #[test]
    fn cross_cardinality() {
        assert_eq!(eval(&ws(), "Q cross D").unwrap().into_dict().len(), 8);
    }

    #[test]
    fn expand_gives_sectioned_dictionary() {
        let d = eval(&ws(), "P(D,B) // D").unwrap().into_dict();
        assert_eq!(d.labels(), ["IT", "Person1", "Person2", "Person3", "HR", "Person4", "Person5"]);
        let expected: Genesis = [("B", "USA"), ("D(USA)", "IT")].into_iter().collect();
        assert_eq!(d.entries[1].genesis, expected);
    }

    #[test]
    fn collapse_by_branch() {
        let Value::Family(f) = eval(&ws(), "union P(D,B) | B").unwrap() else { panic!() };
        assert_eq!(f.members.len(), 3);
    }

    #[test]
    fn errors() {
        let ws = ws();
        assert_eq!(eval(&ws, "D union X").unwrap_err(), EvalError::UnboundName("X".into()));
        assert!(matches!(eval(&ws, "P(D)").unwrap_err(), EvalError::Arity { .. }));
        assert!(matches!(eval(&ws, "P(B,D)").unwrap_err(), EvalError::ParamMismatch { .. }));
        assert!(matches!(eval(&ws, "union D | B").unwrap_err(), EvalError::NotFamily(_)));
        assert!(matches!(eval(&ws, "D union B").unwrap_err(), EvalError::Dict(DictError::UniverseMismatch { .. })));
    }

    #[test]
    fn bindings_restrict() {
        let ws = ws();
        let mut b = Bindings::new();
        b.insert("B".into(), "USA".into());
        let e = parse_expr("P(D,B)").unwrap();
        let d = Env::with_bindings(&ws, &b).eval_dict(&e).unwrap();
        assert_eq!(d.labels(), ["Person1", "Person2", "Person4"]);
    }

    #[test]
    fn eval_is_deterministic() {
        let ws = ws();
        let a = format!("{:?}", eval(&ws, "(union P(D,B) | B)").unwrap());
        let b = format!("{:?}", eval(&ws, "(union P(D,B) | B)").unwrap());
        assert_eq!(a, b);
    }
}
