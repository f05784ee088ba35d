"""Scores the pairs in codebleu_pairs.py with the public `codebleu` package
(pip install codebleu tree-sitter-{java,python,javascript,c}) and writes
tests/golden/codebleu_golden.json.

The reference data-flow walk iterates Python sets, so each pair is scored
under several hash seeds; a pair whose values move is dropped.
"""

import json
import logging
import os
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
SEEDS = ["0", "1", "2", "3", "4"]


def score_all():
    sys.path.insert(0, str(HERE))
    from codebleu import calc_codebleu
    from codebleu_pairs import PAIRS

    out = {}
    for lang, pairs in PAIRS.items():
        rows = []
        for pred, ref in pairs:
            r = calc_codebleu([ref], [pred], lang)
            row = {k: r[k] for k in sorted(r)}
            # The reference reports 0 when the reference side has no data
            # flow at all; record that so it can be told apart from a miss.
            row["ref_has_dataflow"] = calc_codebleu([ref], [ref], lang)["dataflow_match_score"] > 0
            rows.append(row)
        out[lang] = rows
    return out


def main():
    logging.disable(logging.WARNING)
    if len(sys.argv) > 1 and sys.argv[1] == "--child":
        json.dump(score_all(), sys.stdout)
        return
    runs = []
    for seed in SEEDS:
        env = dict(os.environ, PYTHONHASHSEED=seed)
        res = subprocess.run([sys.executable, __file__, "--child"], env=env, capture_output=True, text=True, check=True)
        runs.append(json.loads(res.stdout))

    sys.path.insert(0, str(HERE))
    from codebleu_pairs import PAIRS
    from importlib.metadata import version

    golden = {
        "oracle": "codebleu " + version("codebleu") + ", tree-sitter " + version("tree-sitter"),
        "config": "w=0.25,0.25,0.25,0.25;n=4;kw=1/0.2;eps=0.1",
        "pairs": [],
    }
    dropped = 0
    for lang, pairs in PAIRS.items():
        for i, (pred, ref) in enumerate(pairs):
            vals = [run[lang][i] for run in runs]
            if any(v != vals[0] for v in vals[1:]):
                dropped += 1
                continue
            v = vals[0]
            golden["pairs"].append({
                "language": lang,
                "prediction": pred,
                "reference": ref,
                "ngram": v["ngram_match_score"],
                "weighted_ngram": v["weighted_ngram_match_score"],
                "ast_match": v["syntax_match_score"],
                "dataflow_match": v["dataflow_match_score"],
                "ref_has_dataflow": v["ref_has_dataflow"],
                "codebleu": v["codebleu"],
            })
    target = HERE.parent / "golden" / "codebleu_golden.json"
    target.write_text(json.dumps(golden, indent=1) + "\n")
    print(f"wrote {len(golden['pairs'])} pairs, dropped {dropped} unstable", file=sys.stderr)


if __name__ == "__main__":
    main()
