"""Blocking on a generated corpus: how many candidates per reference, and how many are right.

Generated data only illustrates the mechanics; its numbers say nothing about real corpora.
"""

from citematch.blocking import BlockingConfig, Strategy, segment_queries, string_queries
from citematch.evaluation import blocking_curve
from citematch.index import build_index, clause_to_str
from citematch.pipeline import blocking_summary, block_all, preprocess_all, resolve_config, select_combinations
from citematch.synth import generate_corpus

corpus = generate_corpus(n_references=200, n_records=3000, seed=1)
refs = preprocess_all(corpus.references)
index = build_index(corpus.records)
print(index.doc_count, "records indexed")

ref = refs[0]
print(ref.raw)
for label, toks in ref.segments.items():
    print(f"  {label:7s}", " ".join(f"{t.text}({t.probability:.2f})" for t in toks))

# one query per usable segment combination, plus bigram phrase queries on the raw string
queries = segment_queries(ref) + string_queries(ref)
print(len(queries), "queries, e.g.")
for q in queries[:3] + queries[-2:]:
    print("  ", clause_to_str(q)[:110])

# keep only combinations whose top hit is right often enough on gold data
combos = select_combinations(refs, corpus.gold, index, resolve_config({}))
print(len(combos), "of 63 combinations kept")

for strategy in Strategy:
    cfg = BlockingConfig(strategy=strategy, enabled_combinations=combos)
    curve = blocking_curve(refs, corpus.gold, index, cfg, max_cutoff=8)
    print(strategy.value)
    for pt in curve.points:
        print(f"  cutoff {pt.cutoff}  recall {pt.recall:.3f}  precision {pt.precision:.3f}  pairs {pt.pairs}")

cands = block_all(refs, index, BlockingConfig(enabled_combinations=combos))
summary = blocking_summary(cands, corpus.gold)
print({k: round(v, 3) if isinstance(v, float) else v for k, v in summary.items()})
