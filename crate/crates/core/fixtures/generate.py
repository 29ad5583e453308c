"""Regenerates the toy corpus and mock model fixtures in this directory.

Texts are ASCII sentences joined by single spaces, each starting with a
name that is unique within its paragraph, so highlighted inputs can be
built by plain string concatenation.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
HL = "<hl>"
DOMAINS = ["amazon", "wiki", "nyt", "reddit"]
NAMES = [
    "Alice", "Bruno", "Chen", "Dara", "Emeka", "Farah", "Goran", "Hana",
    "Ivan", "Jorge", "Kemal", "Lena", "Mateo", "Nadia", "Omar", "Priya",
]
ACTIONS = [
    "repaired the bicycle", "wrote the report", "painted the fence",
    "cooked the dinner", "sold the camera", "planted the garden",
    "fixed the router", "reviewed the headphones", "signed the treaty",
    "won the election", "posted the thread", "answered the question",
]
PLACES = ["Lisbon", "Osaka", "Nairobi", "Quito", "Oslo", "Hanoi", "Perth", "Tunis"]


def paragraph(i):
    n = 1 + (i * 7) % 6
    sentences, facts = [], []
    for j in range(n):
        name = NAMES[(i + 3 * j) % len(NAMES)]
        action = ACTIONS[(i * 5 + j) % len(ACTIONS)]
        place = PLACES[(i + j) % len(PLACES)]
        sentences.append(f"{name} {action} in {place}.")
        facts.append((name, f"Who {action} in {place}?"))
    return sentences, facts


def highlight(sentences, j, end):
    """Highlights the first `end` characters of sentence `j`."""
    s = sentences[j]
    body = f"{HL} {s[:end]} {HL}"
    if end < len(s):
        body += " " + s[end:].lstrip()
    return " ".join(p for p in (" ".join(sentences[:j]), body, " ".join(sentences[j + 1 :])) if p)


def flatten(facts):
    return " | ".join(f"question: {q}, answer: {a}" for a, q in facts)


def main():
    contexts, ae, qg, multi, e2e = [], {}, {}, {}, {}
    quads, test = [], []
    for i in range(50):
        sentences, facts = paragraph(i)
        text = " ".join(sentences)
        cid = f"ctx{i:02d}"
        domain = DOMAINS[i % 4]
        contexts.append({"id": cid, "text": text, "domain": domain, "pairs": []})
        for j, (name, question) in enumerate(facts):
            ae_in = highlight(sentences, j, len(sentences[j]))
            qg_in = highlight(sentences, j, len(name))
            ae[ae_in] = name
            qg[qg_in] = question
            multi["extract answer: " + ae_in] = name
            multi["generate question: " + qg_in] = question
            quads.append(
                {"id": cid, "paragraph": text, "sentence_index": j, "answer": name,
                 "question": question, "domain": domain}
            )
        e2e[text] = flatten(facts[: (len(facts) + 1) // 2])
        name, question = facts[0]
        test.append({"id": f"{cid}-q0", "context": text, "question": question,
                     "answers": [name], "domain": domain})
        test.append({"id": f"{cid}-q1", "context": text,
                     "question": f"Where did {name} go afterwards?",
                     "answers": [PLACES[i % len(PLACES)]], "domain": domain})

    def dump_jsonl(name, rows):
        with open(os.path.join(HERE, name), "w") as f:
            for r in rows:
                f.write(json.dumps(r) + "\n")

    def dump_mock(name, mapping):
        with open(os.path.join(HERE, name), "w") as f:
            json.dump({"map": mapping, "fallback": ""}, f, indent=1, sort_keys=True)
            f.write("\n")

    dump_jsonl("contexts.jsonl", contexts)
    dump_jsonl("quads.jsonl", quads)
    dump_jsonl("test.jsonl", test)
    dump_mock("mock_ae.json", ae)
    dump_mock("mock_qg.json", qg)
    dump_mock("mock_multitask.json", multi)
    dump_mock("mock_end2end.json", e2e)


if __name__ == "__main__":
    main()
