use std::collections::{HashMap, HashSet};

use super::{Schema, StatementKind};
use crate::store::{Triple, TripleStore};
use crate::symbol::{rdf_type, Symbol};

/// Adds every instance triple entailed by the schema: property inclusion,
/// class inclusion of `rdf:type` triples, and domain/range typing.
///
/// Schema statements themselves are not added; see
/// [`saturate_with_schema`] for that variant.
pub fn saturate(store: &TripleStore, schema: &Schema) -> TripleStore {
    if schema.is_empty() {
        return store.clone();
    }
    let ty = rdf_type();
    let mut super_props: HashMap<Symbol, Vec<Symbol>> = HashMap::new();
    let mut super_classes: HashMap<Symbol, Vec<Symbol>> = HashMap::new();
    let mut domains: HashMap<Symbol, Vec<Symbol>> = HashMap::new();
    let mut ranges: HashMap<Symbol, Vec<Symbol>> = HashMap::new();
    for st in schema.statements() {
        let map = match st.kind {
            StatementKind::SubPropertyOf => &mut super_props,
            StatementKind::SubClassOf => &mut super_classes,
            StatementKind::Domain => &mut domains,
            StatementKind::Range => &mut ranges,
        };
        map.entry(st.lhs).or_default().push(st.rhs);
    }
    let mut all: HashSet<Triple> = store.triples().collect();
    let mut work: Vec<Triple> = all.iter().copied().collect();
    while let Some([s, p, o]) = work.pop() {
        let mut derived: Vec<Triple> = Vec::new();
        for &q in super_props.get(&p).into_iter().flatten() {
            derived.push([s, q, o]);
        }
        for &c in domains.get(&p).into_iter().flatten() {
            derived.push([s, ty, c]);
        }
        for &c in ranges.get(&p).into_iter().flatten() {
            derived.push([o, ty, c]);
        }
        if p == ty {
            for &c in super_classes.get(&o).into_iter().flatten() {
                derived.push([s, ty, c]);
            }
        }
        for t in derived {
            if all.insert(t) {
                work.push(t);
            }
        }
    }
    TripleStore::from_triples(all)
}

/// [`saturate`] plus the schema closure stored as triples.
pub fn saturate_with_schema(store: &TripleStore, schema: &Schema) -> TripleStore {
    let sat = saturate(store, schema);
    let closure = schema.closure();
    TripleStore::from_triples(
        sat.triples()
            .chain(closure.statements().iter().map(|s| s.as_triple())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdfs::Statement;

    fn sym(s: &str) -> Symbol {
        Symbol::new(s)
    }

    fn painter_schema() -> Schema {
        Schema::new([
            Statement::new(StatementKind::SubPropertyOf, "hasPainted", "hasCreated"),
            Statement::new(StatementKind::Range, "hasPainted", "painting"),
            Statement::new(StatementKind::SubClassOf, "painting", "masterpiece"),
            Statement::new(StatementKind::SubClassOf, "masterpiece", "work"),
        ])
    }

    #[test]
    fn implicit_instance_triples() {
        let st = TripleStore::load_str("u hasPainted b\n").unwrap();
        let sat = saturate(&st, &painter_schema());
        for t in [
            ["u", "hasCreated", "b"],
            ["b", "rdf:type", "painting"],
            ["b", "rdf:type", "masterpiece"],
            ["b", "rdf:type", "work"],
        ] {
            assert!(sat.contains(&[sym(t[0]), sym(t[1]), sym(t[2])]), "{t:?}");
        }
        assert_eq!(sat.len(), 5);
    }

    #[test]
    fn schema_variant_adds_entailed_inclusions() {
        let st = TripleStore::load_str("u hasPainted b\n").unwrap();
        let sat = saturate_with_schema(&st, &painter_schema());
        assert!(sat.contains(&[sym("painting"), sym("rdfs:subClassOf"), sym("work")]));
    }

    #[test]
    fn empty_schema_is_identity() {
        let st = TripleStore::load_str("a p b\nb rdf:type c\n").unwrap();
        let sat = saturate(&st, &Schema::default());
        assert_eq!(sat.triples().collect::<Vec<_>>(), st.triples().collect::<Vec<_>>());
    }
}
