"""Regenerates em_pairs.json with the reference SQuAD v1.1 normalisation.

Run from this directory: python3 make_em_fixture.py
"""
import json
import re
import string


def normalize_answer(s):
    def remove_articles(text):
        return re.sub(r"\b(a|an|the)\b", " ", text)

    def white_space_fix(text):
        return " ".join(text.split())

    def remove_punc(text):
        exclude = set(string.punctuation)
        return "".join(ch for ch in text if ch not in exclude)

    return white_space_fix(remove_articles(remove_punc(s.lower())))


def exact_match(prediction, golds):
    return int(any(normalize_answer(prediction) == normalize_answer(g) for g in golds))


PAIRS = [
    ("The A18", ["a18"]),
    ("A17", ["A18"]),
    ("gabriel abrantes.", ["Gabriel Abrantes"]),
    ("  Paris ", ["paris"]),
    ("the the the", [""]),
    ("An apple a day", ["apple day"]),
    ("theater", ["ater"]),
    ("Anna's book", ["annas book"]),
    ("U.S.A.", ["usa"]),
    ("New-York", ["newyork", "new york"]),
    ("New York", ["newyork"]),
    ("a-b-c", ["abc"]),
    ("The Beatles (band)", ["beatles band"]),
    ("1,000,000", ["1000000"]),
    ("Café Münster", ["café münster"]),
    ("I don't know", ["I do not know", "i dont know"]),
    ("an", ["a"]),
    ("Theodore Roosevelt", ["odore roosevelt"]),
    ("42\tapples", ["42 apples"]),
    ("Mount Everest", ["K2", "Everest"]),
]

if __name__ == "__main__":
    rows = [
        {"prediction": p, "golds": g, "normalized": normalize_answer(p), "em": exact_match(p, g)}
        for p, g in PAIRS
    ]
    with open("em_pairs.json", "w", encoding="utf-8") as f:
        json.dump(rows, f, ensure_ascii=False, indent=1)
        f.write("\n")
