"""Smoke test for the Python bindings; run after `pip install -e .`."""

import json
from pathlib import Path

import admgpy

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def main():
    # Graph algebra and separation.
    g = admgpy.Graph((FIXTURES / "graphs" / "adjust.admg").read_text())
    assert g.nodes() == ["A", "B", "C"]
    assert ("A", "->", "B") in g.edges()
    assert g.is_ancestral(["C"]) and not g.is_ancestral(["B"])
    assert not admgpy.separated(g, ["A"], ["B"], [])
    assert admgpy.separation_witness(g, ["A"], ["B"]) is not None
    gi = g.intervene(["A"])
    assert ("A", "->", "B") in gi.edges()
    chain = admgpy.Graph("nodes X M Y\nX -> M\nM -> Y\n")
    assert admgpy.separated(chain, ["X"], ["Y"], ["M"])
    assert admgpy.separated(chain, ["X"], ["Y"], [], "route", ["M"])

    # Identification with the adjustment formula.
    res = admgpy.identify(g, ["A"], ["B"])
    assert res["verdict"] == "identified", res
    assert res["estimand"] == "sum_c p(B|A,c) p(c)", res

    # A non-identifiable effect with a line-path witness.
    g2 = admgpy.Graph((FIXTURES / "graphs" / "game2.admg").read_text())
    res2 = admgpy.identify(g2, ["A"], ["B"])
    assert res2["verdict"] == "not-identified" and "A -- B" in res2["witness"], res2

    # Exact learning from interventional facts.
    penalty, graphs = admgpy.learn_graphs(
        (FIXTURES / "facts" / "three_node_all.facts").read_text()
    )
    assert penalty == 3 and len(graphs) == 2, (penalty, graphs)
    asp = admgpy.emit_asp((FIXTURES / "facts" / "three_node_obs.facts").read_text())
    assert "node(X) :- nodes(N), X=1..N." in asp

    # SEM oracle: the identified estimand matches the interventional law.
    sem = admgpy.Sem.random(g, seed=5)
    vars_, mean, cov = sem.interventional([("A", 1.0)])
    assert vars_ == ["B", "C"] and len(mean) == 2 and len(cov) == 2
    data = sem.sample(200, seed=1)
    assert len(data) == 200 and len(data[0]) == 3
    assert sem.loglik(data) > sem.loglik(data) - 1  # finite
    facts = admgpy.sep_oracle(g)
    assert facts.startswith("nodes 3")

    # Gated model: context switching and per-context verdicts.
    model = admgpy.GatedModel((FIXTURES / "gated" / "sign_switch.json").read_text())
    assert model.initial() == "low"
    ctx, log = model.run([json.dumps({"kind": "intervene", "var": "A", "value": 2.0})])
    assert ctx == "high" and len(log) == 1
    hi = model.identify_in_context("high", ["A"], ["B"])
    lo = model.identify_in_context("low", ["A"], ["B"])
    assert hi["estimand"] == "sum_c p(B|A,c) p(c)"
    assert lo["estimand"] == "p(B|A)"

    print("smoke test ok")


if __name__ == "__main__":
    main()
