//! SQL text emission for constraint bodies.
//!
//! A body becomes one `SELECT` over its positive literals, joined with
//! `INNER JOIN ... ON` equalities wherever a variable reoccurs, with constant
//! bindings as `WHERE` equalities. Each negative literal becomes a
//! `WHERE NOT EXISTS` subquery whose variables are correlated to their
//! positive binding sites through `WHERE` clauses, never joins.

use std::collections::BTreeMap;

use crate::model::{Aic, Literal, Term};

/// Emits the body query of a constraint as a single SQL `SELECT` statement.
pub fn emit_sql(aic: &Aic) -> String {
    let positives: Vec<&Literal> = aic.body().iter().filter(|l| l.is_positive()).collect();
    let negatives: Vec<&Literal> = aic.body().iter().filter(|l| !l.is_positive()).collect();

    // Reference name per positive literal: repeated tables get aliases.
    let mut occurrence: BTreeMap<&str, usize> = BTreeMap::new();
    let refs: Vec<(String, bool)> = positives
        .iter()
        .map(|l| {
            let n = occurrence.entry(l.atom.table()).or_insert(0);
            *n += 1;
            if *n == 1 {
                (l.atom.table().to_string(), false)
            } else {
                (format!("{}_{}", l.atom.table(), n), true)
            }
        })
        .collect();

    let mut bindings: BTreeMap<&str, String> = BTreeMap::new();
    let mut from = String::new();
    let mut where_conds: Vec<String> = Vec::new();
    for (i, literal) in positives.iter().enumerate() {
        let (ref_name, aliased) = &refs[i];
        let mut join_conds: Vec<String> = Vec::new();
        for (col, term) in literal.atom.bindings() {
            let qualified = format!("{ref_name}.{col}");
            match term {
                Term::Const(value) => where_conds.push(format!("{qualified}={}", quote(value))),
                Term::Var(name) => match bindings.get(name.as_str()) {
                    Some(site) => join_conds.push(format!("{site}={qualified}")),
                    None => {
                        bindings.insert(name, qualified);
                    }
                },
            }
        }
        if i == 0 {
            from = render_ref(literal.atom.table(), ref_name, *aliased);
            where_conds.splice(0..0, join_conds);
        } else {
            let on = if join_conds.is_empty() {
                "1=1".to_string()
            } else {
                join_conds.join(" AND ")
            };
            from.push_str(&format!(
                " INNER JOIN {} ON {on}",
                render_ref(literal.atom.table(), ref_name, *aliased)
            ));
        }
    }

    for literal in &negatives {
        let table = literal.atom.table();
        let clashes = occurrence.contains_key(table);
        let ref_name = if clashes {
            format!("{table}_neg")
        } else {
            table.to_string()
        };
        let mut conds: Vec<String> = Vec::new();
        for (col, term) in literal.atom.bindings() {
            let qualified = format!("{ref_name}.{col}");
            match term {
                Term::Const(value) => conds.push(format!("{qualified}={}", quote(value))),
                Term::Var(name) => {
                    let site = bindings
                        .get(name.as_str())
                        .expect("rule safety binds negated variables");
                    conds.push(format!("{qualified}={site}"));
                }
            }
        }
        let inner_from = render_ref(table, &ref_name, clashes);
        let subquery = if conds.is_empty() {
            format!("SELECT * FROM {inner_from}")
        } else {
            format!("SELECT * FROM {inner_from} WHERE {}", conds.join(" AND "))
        };
        where_conds.push(format!("NOT EXISTS ({subquery})"));
    }

    let head = if positives.is_empty() {
        "SELECT 1".to_string()
    } else {
        format!("SELECT * FROM {from}")
    };
    if where_conds.is_empty() {
        head
    } else {
        format!("{head} WHERE {}", where_conds.join(" AND "))
    }
}

fn render_ref(table: &str, ref_name: &str, aliased: bool) -> String {
    if aliased {
        format!("{table} AS {ref_name}")
    } else {
        table.to_string()
    }
}

fn quote(value: &str) -> String {
    format!("'{}'", value.replace('\'', "''"))
}
