#!/usr/bin/env python3
"""Regenerates the bundled fixture set (toy dataset, conformance corpus,
templates, sandbox tasks). Span offsets are Unicode scalar offsets, which
is exactly what Python string indices are."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


def w(path, text):
    full = os.path.join(HERE, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    with open(full, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def wj(path, obj):
    w(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# Toy regulation: 3 clauses, 6 CUs, 4 edges (all four relation kinds).
# --------------------------------------------------------------------------

S_A = ("Listed companies conducting a share buyback shall disclose the buyback "
       "within fifteen days of the event; during the buyback window only this "
       "clause's disclosure duty and sale cap apply.")
S_B = ("Sales by the controlling shareholder during a buyback window must not "
       "exceed the cap set by Article 3.")
S_C = "A quarterly dividend declaration must accompany every buyback period."
S_E = ("Transfers of restricted shares shall be announced within fifteen days "
       "of the transfer.")
S_D = ("Where shares are disposed through judicial enforcement, the transfer "
       "announcement duty is waived.")
S_F = ("The controlling shareholder sale cap is two percent of total shares "
       "outstanding; mandated transfer announcements remain binding in every "
       "scenario.")

TEXT = ("第一条 " + S_A + " " + S_B + " " + S_C + "\n"
        "第二条 " + S_E + " " + S_D + "\n"
        "第三条 " + S_F)


def span(sentence):
    start = TEXT.index(sentence)
    return {"start": start, "end": start + len(sentence)}


toy = {
    "document_id": "toy_buyback",
    "source_text": TEXT,
    "units": [
        {
            "id": "A", "clause_id": "c1",
            "subject": ["listed company"],
            "condition": ["conducts a share buyback"],
            "constraint": [
                "disclose the buyback within fifteen days of the event",
                "restrict this clause's obligations to the disclosure duty and the sale cap",
            ],
            "contextual_info": [],
            "span": span(S_A),
        },
        {
            "id": "B", "clause_id": "c1",
            "subject": ["controlling shareholder"],
            "condition": ["during a buyback window"],
            "constraint": ["sales must not exceed the cap set by Article 3"],
            "contextual_info": ["cap defined in Article 3"],
            "span": span(S_B),
        },
        {
            "id": "C", "clause_id": "c1",
            "subject": ["listed company"],
            "condition": ["every buyback period"],
            "constraint": ["declare a quarterly dividend"],
            "contextual_info": [],
            "span": span(S_C),
        },
        {
            "id": "D", "clause_id": "c2",
            "subject": ["listed company"],
            "condition": ["shares disposed through judicial enforcement"],
            "constraint": [],
            "contextual_info": ["waives the transfer announcement duty"],
            "span": span(S_D),
        },
        {
            "id": "E", "clause_id": "c2",
            "subject": ["restricted shareholder"],
            "condition": ["transfers restricted shares"],
            "constraint": ["announce within fifteen days of the transfer"],
            "contextual_info": [],
            "span": span(S_E),
        },
        {
            "id": "F", "clause_id": "c3",
            "subject": ["controlling shareholder"],
            "condition": [],
            "constraint": [
                "sale cap is two percent of total shares outstanding",
                "transfer announcements remain binding in every scenario",
            ],
            "contextual_info": ["cap ratio: 0.02"],
            "span": span(S_F),
        },
    ],
    "relations": [
        {"source": "A", "target": "B", "kind": "only_include"},
        {"source": "B", "target": "F", "kind": "refer_to"},
        {"source": "D", "target": "E", "kind": "exclude"},
        {"source": "F", "target": "E", "kind": "should_include"},
    ],
    "metadata": {
        "category": "share_repurchase",
        "effective_date": "2025-01-01",
    },
}
wj("toy/annotations/toy_buyback.json", toy)

FACTS_HEADER = "event,holder,shares_sold,total_shares,disclosed,event_date,announce_date\n"
R1 = "buyback,controlling,10,1000,true,2024-03-20,2024-03-10\n"
R2 = "buyback,controlling,15,1000,true,2024-04-20,2024-04-05\n"
R2_LATE = "buyback,controlling,15,1000,true,2024-04-20,2024-04-01\n"
R3 = "judicial_enforcement,retail,5,1000,true,2024-05-01,2024-04-28\n"

w("toy/tables/facts.csv", FACTS_HEADER + R1 + R2 + R3)
w("toy/tables/facts_clean.csv", FACTS_HEADER + R1 + R3)
w("toy/tables/facts_late.csv", FACTS_HEADER + R1 + R2_LATE + R3)

wj("toy/bindings.json", {
    "bindings": {
        "A": {
            "gate": 'exists(event = "buyback")',
            "body": 'forall(disclosed and within_days(event_date, announce_date, 15) '
                    'where event = "buyback")',
        },
        "B": {
            "body": 'sum(shares_sold where holder = "controlling") / max(total_shares) '
                    '<= param(max_ratio)',
        },
        "C": {"body": 'count(event where event = "dividend") >= 1'},
        "D": {"gate": 'exists(event = "judicial_enforcement")'},
        "E": {
            "gate": 'exists(event = "transfer")',
            "body": 'forall(within_days(announce_date, event_date, 15) '
                    'where event = "transfer")',
        },
        "F": {
            "body": "param(max_ratio) > 0",
            "params": {"max_ratio": "0.02"},
        },
    }
})

wj("toy/tasks/t_simple_ratio.json", {
    "id": "t_simple_ratio",
    "difficulty": "simple",
    "language": "ir",
    "gate": None,
    "body_template": 'sum(shares_sold where holder = "controlling") / max(total_shares) <= [[1]]',
    "params": {"max_ratio": "0.02"},
    "tests": [
        {"fixture": "../tables/facts.csv", "expected": "NonCompliant"},
        {"fixture": "../tables/facts_clean.csv", "expected": "Compliant"},
    ],
    "compare": "verdict",
    "reference": ["param(max_ratio)"],
    "reasoning": "1. The cap applies to controlling-shareholder sales only, so filter rows by "
                 "holder. 2. Aggregate shares_sold over the filtered rows. 3. Normalize by total "
                 "shares outstanding. 4. The threshold is the Article 3 cap, supplied as the "
                 "max_ratio parameter. 5. Compare the ratio against the parameter, inclusive.",
    "provenance_cu_ids": ["B", "F"],
})

wj("toy/tasks/t_difficult_disclosure.json", {
    "id": "t_difficult_disclosure",
    "difficulty": "difficult",
    "language": "ir",
    "gate": 'exists(event = "buyback")',
    "body_template": "[[1]]",
    "params": {},
    "tests": [
        {"fixture": "../tables/facts.csv", "expected": "Compliant"},
        {"fixture": "../tables/facts_late.csv", "expected": "NonCompliant"},
    ],
    "compare": "verdict",
    "reference": ['forall(disclosed and within_days(event_date, announce_date, 15) '
                  'where event = "buyback")'],
    "reasoning": "1. The duty applies only to buyback events, so quantify over buyback rows. "
                 "2. Each such event must be disclosed. 3. The announcement must fall within "
                 "fifteen days of the event date. 4. Both conditions must hold for every row, "
                 "so use forall. 5. Non-buyback rows are out of scope via the where filter.",
    "provenance_cu_ids": ["A"],
})

# Medium task used by splice tests (not part of the toy dataset counts).
wj("tasks_extra/t_medium_ratio.json", {
    "id": "t_medium_ratio",
    "difficulty": "medium",
    "language": "ir",
    "gate": None,
    "body_template": 'sum(shares_sold where holder = "controlling") / [[1]] <= [[2]] + [[3]]',
    "params": {"max_ratio": "0.02"},
    "tests": [
        {"fixture": "../toy/tables/facts_clean.csv", "expected": "Compliant"},
        {"fixture": "../toy/tables/facts.csv", "expected": "NonCompliant"},
    ],
    "compare": "verdict",
    "reference": ["max(total_shares)", "param(max_ratio)", "0"],
    "reasoning": "1. Aggregate controlling-shareholder sales. 2. Normalize by total shares. "
                 "3. Compare against the cap parameter.",
    "provenance_cu_ids": ["B"],
})

# --------------------------------------------------------------------------
# Conformance corpus for the interchange grammar.
# --------------------------------------------------------------------------

minimal = {
    "document_id": "conf_minimal",
    "source_text": "A single obligation sentence.",
    "units": [{
        "id": "U1", "clause_id": "c1", "subject": ["issuer"], "condition": [],
        "constraint": ["disclose"], "contextual_info": [],
        "span": {"start": 0, "end": 29},
    }],
    "relations": [],
    "metadata": {},
}
wj("conformance/valid_minimal.json", minimal)

two_kinds = {
    "document_id": "conf_two_kinds",
    "source_text": "First sentence here. Second sentence follows.",
    "units": [
        {"id": "U1", "clause_id": "c1", "subject": ["issuer"], "condition": ["when listed"],
         "constraint": ["report"], "contextual_info": [], "span": {"start": 0, "end": 20}},
        {"id": "U2", "clause_id": "c1", "subject": ["issuer"], "condition": [],
         "constraint": ["archive"], "contextual_info": [], "span": {"start": 21, "end": 45}},
    ],
    "relations": [
        {"source": "U1", "target": "U2", "kind": "refer_to"},
        {"source": "U2", "target": "U1", "kind": "should_include"},
    ],
    "metadata": {"category": "conformance"},
}
wj("conformance/valid_two_kinds.json", two_kinds)

valid_bytes = json.dumps(minimal, indent=2, ensure_ascii=False) + "\n"
w("conformance/invalid_truncated.json", valid_bytes[: len(valid_bytes) - 2])

bad_edge = json.loads(json.dumps(minimal))
bad_edge["document_id"] = "conf_dangling"
bad_edge["relations"] = [{"source": "U1", "target": "NOPE", "kind": "exclude"}]
wj("conformance/invalid_dangling_edge.json", bad_edge)

selfloop = json.loads(json.dumps(minimal))
selfloop["document_id"] = "conf_selfloop"
selfloop["relations"] = [{"source": "U1", "target": "U1", "kind": "exclude"}]
wj("conformance/invalid_selfloop.json", selfloop)

cycle = json.loads(json.dumps(two_kinds))
cycle["document_id"] = "conf_cycle"
cycle["relations"] = [
    {"source": "U1", "target": "U2", "kind": "exclude"},
    {"source": "U2", "target": "U1", "kind": "exclude"},
]
wj("conformance/invalid_effect_cycle.json", cycle)

bad_span = json.loads(json.dumps(minimal))
bad_span["document_id"] = "conf_bad_span"
bad_span["units"][0]["span"] = {"start": 0, "end": 9999}
wj("conformance/invalid_span.json", bad_span)

overlap = json.loads(json.dumps(two_kinds))
overlap["document_id"] = "conf_overlap"
overlap["relations"] = []
overlap["units"][0]["span"] = {"start": 0, "end": 25}
overlap["units"][1]["span"] = {"start": 10, "end": 45}
wj("conformance/invalid_partial_overlap.json", overlap)

identical = json.loads(json.dumps(two_kinds))
identical["document_id"] = "conf_identical_spans"
identical["relations"] = []
identical["units"][0]["span"] = {"start": 0, "end": 20}
identical["units"][1]["span"] = {"start": 0, "end": 20}
wj("conformance/warn_identical_spans.json", identical)

unknown_kind = json.loads(json.dumps(two_kinds))
unknown_kind["document_id"] = "conf_unknown_kind"
unknown_kind["relations"] = [{"source": "U1", "target": "U2", "kind": "overrides"}]
wj("conformance/invalid_unknown_kind.json", unknown_kind)

# --------------------------------------------------------------------------
# Prompt templates (skeletons; production prompt text ships with the
# released dataset).
# --------------------------------------------------------------------------

wj("templates/structure_predict.json", {
    "name": "structure_predict_v1",
    "role": "structure_predict",
    "shot_mode": "one_shot",
    "reasoning_directive": False,
    "placeholders": ["regulation_text", "demonstration"],
    "demonstration": valid_bytes.strip(),
    "template": "You convert financial regulations into structured compliance units "
                "(interchange-format JSON).\n\n## Example\n{{demonstration}}\n\n"
                "## Regulation\n{{regulation_text}}\n\n"
                "Return only the interchange-format JSON object.",
})

wj("templates/code_generate.json", {
    "name": "code_generate_v1",
    "role": "code_generate",
    "shot_mode": "one_shot",
    "reasoning_directive": True,
    "placeholders": ["cu_context", "demonstration", "reasoning"],
    "demonstration": 'sum(shares_sold where holder = "controlling") / max(total_shares) '
                     '<= param(max_ratio)',
    "template": "You write deterministic compliance checks in the check-expression "
                "language.\n{{reasoning_directive}}\n\n## Example check\n{{demonstration}}\n\n"
                "## Compliance units and relations\n{{cu_context}}\n\n"
                "## Analyst notes\n{{reasoning}}\n\n"
                "Return one expression per masked region, one per line.",
})

wj("templates/report_polish.json", {
    "name": "report_polish_v1",
    "role": "report_polish",
    "shot_mode": "zero_shot",
    "reasoning_directive": False,
    "placeholders": ["draft_report"],
    "template": "Improve the wording of this compliance report. Keep every "
                "\"verdict[...]\" line and every cited value exactly as written.\n\n"
                "{{draft_report}}",
})

# --------------------------------------------------------------------------
# Sandbox: runner config + a foreign-language (python) task.
# --------------------------------------------------------------------------

wj("sandbox/runner_python.json", {
    "run_template": "python3 {program} {fixture}",
    "compile_template": "python3 -m py_compile {program}",
    "time_limit_seconds": 5,
    "memory_limit_mb": 512,
    "program_filename": "candidate.py",
})

PY_REF = '''import csv
import sys


def main():
    with open(sys.argv[1], newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    sold = sum(float(r["shares_sold"]) for r in rows if r["holder"] == "controlling")
    total = max(float(r["total_shares"]) for r in rows)
    print("Compliant" if sold / total <= 0.02 else "NonCompliant")


main()
'''

wj("sandbox/tasks/t_py_ratio.json", {
    "id": "t_py_ratio",
    "difficulty": "difficult",
    "language": "python",
    "gate": None,
    "body_template": "[[1]]",
    "params": {},
    "tests": [
        {"fixture": "../../toy/tables/facts.csv", "expected": "NonCompliant"},
        {"fixture": "../../toy/tables/facts_clean.csv", "expected": "Compliant"},
    ],
    "compare": "verdict",
    "reference": [PY_REF],
    "reasoning": "Aggregate controlling-shareholder sales from the CSV, normalize by total "
                 "shares, compare against the 2% cap.",
    "provenance_cu_ids": ["B", "F"],
})

print("fixtures written under", HERE)
