"""Smoke test for the rdfvs extension module.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml -o target/wheels
    pip install target/wheels/rdfvs-*.whl
"""

import json

import rdfvs

GALLERY = """\
vanGogh hasPainted starryNight .
vanGogh hasPainted irises .
vanGogh isParentOf theo .
theo hasPainted wheatfield .
rembrandt hasPainted starryNight .
rembrandt isParentOf titus .
titus hasPainted portrait .
starryNight isExpIn moma .
irises isExpIn getty .
starryNight rdf:type painting .
irises rdf:type painting .
wheatfield rdf:type picture .
"""

SCHEMA = """\
painting rdfs:subClassOf picture .
isExpIn rdfs:subPropertyOf isLocatIn .
"""

WORKLOAD = """\
q1(X, Z) :- t(X, hasPainted, starryNight), t(X, isParentOf, Y), t(Y, hasPainted, Z) .
q2(X, M) :- t(X, rdf:type, picture), t(X, isLocatIn, M) .
"""


def main():
    store = rdfvs.TripleStore(GALLERY)
    schema = rdfvs.Schema(SCHEMA)
    queries = rdfvs.parse(WORKLOAD)
    assert len(store) == 12 and len(schema) == 2 and len(queries) == 2

    q = rdfvs.Query("q(X) :- t(X, p, Y), t(X, p, Z) .")
    assert len(q.minimize()) == 1
    assert q.is_equivalent(q.minimize())
    assert q.head == ["?X"]

    q4 = rdfvs.Query("q4(X1, X2) :- t(X1, X2, picture) .")
    assert len(rdfvs.reformulate(q4, schema)) == 6

    saturated = store.saturate(schema)
    assert len(saturated) > len(store)
    want = {q.name: saturated.evaluate(q) for q in queries}

    for mode in ["saturate", "pre", "post"]:
        result = rdfvs.tune(store, queries, schema, mode=mode, strategy="gstr", avf=True, timeout=5.0)
        assert result.views
        assert 0.0 <= result.rcr <= 1.0
        c = result.counters
        assert c["created"] == c["duplicates"] + c["discarded"] + c["explored"] + c["pending"]
        got = result.answer(store, schema)
        for query in queries:
            assert sorted(got[query.name]) == sorted(want[query.name]), (mode, query.name)
        again = rdfvs.TuneResult.from_json(result.to_json())
        assert json.loads(again.to_json()) == json.loads(result.to_json())
        print(f"{mode}: {len(result.views)} views, rcr {result.rcr:.3f}")

    gen = rdfvs.generate_store(500, seed=1)
    wl = rdfvs.generate_workload("star", count=3, atoms=3, seed=2, store=gen)
    assert len(wl) == 3 and all(len(w) == 3 for w in wl)
    result = rdfvs.tune(gen, wl, strategy="gstr", avf=True, timeout=2.0)
    print(f"generated: {len(result.views)} views, rcr {result.rcr:.3f}")

    try:
        rdfvs.Query("not a query")
    except ValueError:
        pass
    else:
        raise AssertionError("bad query text was accepted")

    print("ok")


if __name__ == "__main__":
    main()
