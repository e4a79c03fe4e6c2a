#!/usr/bin/env python3
"""Generates the two constructed languages under data/.

Language A is SVO with a single locative case and heavy homonymy (Acc/Gen,
Com.Sg/Loc.Pl, noun/verb stem sharing). It ships as a CoNLL-U treebank.

Language B is SOV, splits the locative into inessive and elative, and has
fewer homonyms (Acc.Pl/Ill.Pl, Ess/Ine.Pl/Com.Sg). It ships as a
disambiguated cohort file plus raw text and six templates.

Usage: python3 scripts/gen_langs.py [out_dir]   (default: data)
Output is a pure function of SEED.
"""

import os
import random
import sys

SEED = 20200511

FEATS = {
    "Sg": ["Number=Sing"],
    "Pl": ["Number=Plur"],
    "Sg1": ["Number=Sing", "Person=1"],
    "Sg2": ["Number=Sing", "Person=2"],
    "Sg3": ["Number=Sing", "Person=3"],
    "Pl3": ["Number=Plur", "Person=3"],
    "Du2": ["Number=Dual", "Person=2"],
    "Ind": ["Mood=Ind", "VerbForm=Fin"],
    "Imprt": ["Mood=Imp", "VerbForm=Fin"],
    "Prs": ["Tense=Pres"],
    "Prt": ["Tense=Past"],
    "Inf": ["VerbForm=Inf"],
    "Ger": ["VerbForm=Ger"],
    "PrsPrc": ["Tense=Pres", "VerbForm=Part"],
    "Pers": ["PronType=Prs"],
}
for case in ["Nom", "Acc", "Gen", "Ill", "Loc", "Ine", "Ela", "Com", "Ess"]:
    FEATS[case] = ["Case=" + case]
DROPPED = {"TV", "IV", "Subqst"}
PUNCT = {".", "?", "!", ","}


def gold(tags):
    """UD (upos, sorted feats) of an analyzer tag list, POS first."""
    pos = tags[0]
    feats = set()
    for t in tags[1:]:
        if t in DROPPED:
            continue
        feats.update(FEATS[t])
    return pos, sorted(feats)


def apply(lemma, rule):
    strip, append = rule
    assert lemma.endswith(strip), (lemma, rule)
    return lemma[: len(lemma) - len(strip)] + append


class Lang:
    def __init__(self, paradigms):
        # id -> (pos, [(tags, (strip, append))])
        self.paradigms = paradigms
        self.lexicon = []  # (lemma, pos, paradigm id)
        self.by_class = {}

    def add(self, lemma, pid, cls):
        pos = self.paradigms[pid][0]
        self.lexicon.append((lemma, pos, pid))
        self.by_class.setdefault(cls, []).append((lemma, pid))

    def form(self, lemma, pid, tags):
        for t, rule in self.paradigms[pid][1]:
            if t == tags:
                return apply(lemma, rule)
        raise KeyError((lemma, pid, tags))

    def analyses(self):
        index = {}
        for lemma, _pos, pid in self.lexicon:
            for tags, rule in self.paradigms[pid][1]:
                index.setdefault(apply(lemma, rule), set()).add((lemma, tuple(tags)))
        return index

    def write(self, out):
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "lexicon.tsv"), "w", encoding="utf-8") as f:
            f.write("# lemma\tpos\tparadigm\n")
            for lemma, pos, pid in self.lexicon:
                f.write(f"{lemma}\t{pos}\t{pid}\n")
        with open(os.path.join(out, "paradigms.txt"), "w", encoding="utf-8") as f:
            for pid, (pos, forms) in self.paradigms.items():
                f.write(f"paradigm {pid} {pos}\n")
                for tags, (strip, append) in forms:
                    f.write(f"\t{'+'.join(tags)}\t-{strip or '0'}/+{append or '0'}\n")
                f.write("\n")


def noun_forms(pos, table):
    return [([pos] + t.split("+"), r) for t, r in table]


def verb_forms(trans, table):
    return [(["V", trans] + t.split("+"), r) for t, r in table]


A_NOUN = [
    ("Sg+Nom", ("", "")),
    ("Sg+Acc", ("a", "i")),
    ("Sg+Gen", ("a", "i")),
    ("Sg+Ill", ("a", "ii")),
    ("Sg+Loc", ("a", "is")),
    ("Sg+Com", ("a", "iin")),
    ("Pl+Nom", ("a", "at")),
    ("Pl+Acc", ("a", "aid")),
    ("Pl+Gen", ("a", "aid")),
    ("Pl+Ill", ("a", "aide")),
    ("Pl+Loc", ("a", "iin")),
    ("Pl+Com", ("a", "aiguin")),
    ("Ess", ("a", "an")),
]
A_VERB = [
    ("Inf", ("", "")),
    ("Ind+Prs+Sg1", ("at", "an")),
    ("Ind+Prs+Sg3", ("at", "a")),
    ("Ind+Prs+Pl3", ("at", "at")),
    ("Ind+Prt+Sg3", ("at", "ii")),
    ("Imprt+Sg2", ("at", "a")),
    ("Ger", ("at", "eamen")),
    ("PrsPrc", ("at", "i")),
]
A_BE = [
    ("Ind+Prs+Sg1", ("eat", "an")),
    ("Ind+Prs+Sg3", ("eat", "ea")),
    ("Ind+Prs+Pl3", ("eat", "eat")),
    ("Ind+Prt+Sg3", ("eat", "ii")),
]

B_NOUN = [
    ("Sg+Nom", ("", "")),
    ("Sg+Acc", ("e", "em")),
    ("Sg+Gen", ("e", "en")),
    ("Sg+Ill", ("e", "an")),
    ("Sg+Ine", ("e", "esne")),
    ("Sg+Ela", ("e", "este")),
    ("Sg+Com", ("e", "ine")),
    ("Pl+Nom", ("e", "h")),
    ("Pl+Acc", ("e", "idie")),
    ("Pl+Gen", ("e", "i")),
    ("Pl+Ill", ("e", "idie")),
    ("Pl+Ine", ("e", "ine")),
    ("Pl+Ela", ("e", "iste")),
    ("Pl+Com", ("e", "igujmie")),
    ("Ess", ("e", "ine")),
]
B_VERB = [
    ("Inf", ("", "")),
    ("Ind+Prs+Sg1", ("edh", "am")),
    ("Ind+Prs+Sg3", ("edh", "e")),
    ("Ind+Prs+Pl3", ("edh", "eh")),
    ("Ind+Prt+Sg3", ("edh", "i")),
    ("Imprt+Sg2", ("edh", "h")),
    ("Ger", ("edh", "eminie")),
    ("PrsPrc", ("edh", "eme")),
]
B_BE = [
    ("Ind+Prs+Sg1", ("eeledh", "leam")),
    ("Ind+Prs+Sg3", ("eeledh", "lea")),
    ("Ind+Prs+Pl3", ("eeledh", "leah")),
    ("Ind+Prt+Sg3", ("eeledh", "lij")),
]


def stems(rng, onsets, nuclei, codas, n, taken):
    out = []
    while len(out) < n:
        s = rng.choice(onsets) + rng.choice(nuclei) + rng.choice(codas)
        if s not in taken:
            taken.add(s)
            out.append(s)
    return out


def build_a(rng):
    lang = Lang(
        {
            "a_n": ("N", noun_forms("N", A_NOUN)),
            "a_tv": ("V", verb_forms("TV", A_VERB)),
            "a_iv": ("V", verb_forms("IV", A_VERB)),
            "a_be": ("V", verb_forms("IV", A_BE)),
            "a_adv": ("Adv", [(["Adv"], ("", ""))]),
            "a_pron_sg1": ("Pron", [
                (["Pron", "Pers", "Sg1", "Nom"], ("", "")),
                (["Pron", "Pers", "Sg1", "Acc"], ("un", "u")),
                (["Pron", "Pers", "Sg1", "Gen"], ("un", "u")),
            ]),
            "a_pron_sg3": ("Pron", [
                (["Pron", "Pers", "Sg3", "Nom"], ("", "")),
                (["Pron", "Pers", "Sg3", "Acc"], ("on", "u")),
                (["Pron", "Pers", "Sg3", "Gen"], ("on", "u")),
            ]),
        }
    )
    taken = set()
    roots = stems(rng, ["b", "d", "g", "j", "l", "m", "n", "r", "s", "v", "č", "š"],
                  ["á", "ea", "ie", "uo", "o"], ["ll", "dd", "hk", "ss", "vv", "st", "rr"], 60, taken)
    # shared roots give noun/verb homonymy
    for i, r in enumerate(roots):
        if i < 50:
            lang.add(r + "a", "a_n", "N")
        if i >= 8:
            lang.add(r + "at", "a_tv" if i % 2 else "a_iv", "TV" if i % 2 else "IV")
    lang.add("leat", "a_be", "BE")
    for adv in ["dál", "dáppe", "ihttin", "dakko", "álo", "vuos"]:
        lang.add(adv, "a_adv", "Adv")
    lang.add("mun", "a_pron_sg1", "P1")
    lang.add("son", "a_pron_sg3", "P3")
    return lang


def build_b(rng):
    lang = Lang(
        {
            "b_n": ("N", noun_forms("N", B_NOUN)),
            "b_tv": ("V", verb_forms("TV", B_VERB)),
            "b_iv": ("V", verb_forms("IV", B_VERB)),
            "b_be": ("V", verb_forms("IV", B_BE)),
            "b_adv": ("Adv", [(["Adv"], ("", ""))]),
            "b_pron_sg1": ("Pron", [
                (["Pron", "Pers", "Sg1", "Nom"], ("", "")),
                (["Pron", "Pers", "Sg1", "Acc"], ("", "m")),
                (["Pron", "Pers", "Sg1", "Gen"], ("e", "ov")),
            ]),
            "b_pron_sg3": ("Pron", [
                (["Pron", "Pers", "Sg3", "Nom"], ("", "")),
                (["Pron", "Pers", "Sg3", "Acc"], ("", "m")),
                (["Pron", "Pers", "Sg3", "Gen"], ("", "n")),
            ]),
            "b_pron_sg3b": ("Pron", [
                (["Pron", "Pers", "Sg3", "Acc"], ("", "")),
            ]),
        }
    )
    taken = set()
    roots = stems(rng, ["b", "d", "g", "j", "l", "m", "n", "r", "s", "v", "tj", "sj"],
                  ["åe", "ue", "ie", "aa", "ee"], ["dt", "kt", "rk", "ss", "pm", "lt", "hp"], 60, taken)
    for i, r in enumerate(roots):
        if i < 40:
            lang.add(r + "ie", "b_n", "N")
        if i >= 22:
            # shared with a noun: verb Prs.Sg3 equals noun Sg.Nom
            base = r + "i"
        else:
            base = r + "a"
        if i >= 16:
            lang.add(base + "edh", "b_tv" if i % 2 else "b_iv", "TV" if i % 2 else "IV")
    lang.add("eeledh", "b_be", "BE")
    for adv in ["daelie", "daesnie", "jïh", "aktem", "vihth", "gaajhkh"]:
        lang.add(adv, "b_adv", "Adv")
    lang.add("manne", "b_pron_sg1", "P1")
    lang.add("dihte", "b_pron_sg3", "P3")
    lang.add("altemse", "b_pron_sg3b", "P3B")
    return lang


def pick(rng, lang, cls):
    return rng.choice(lang.by_class[cls])


def word(lang, entry, tags):
    lemma, pid = entry
    return (lang.form(lemma, pid, tags), lemma, tags)


def subject(rng, lang, allow_pron=True):
    """(words, agreement tag)"""
    r = rng.random()
    if allow_pron and r < 0.15:
        return [word(lang, pick(rng, lang, "P1"), ["Pron", "Pers", "Sg1", "Nom"])], "Sg1"
    if allow_pron and r < 0.25:
        return [word(lang, pick(rng, lang, "P3"), ["Pron", "Pers", "Sg3", "Nom"])], "Sg3"
    number = "Pl" if rng.random() < 0.3 else "Sg"
    words = []
    if rng.random() < 0.2:
        words.append(word(lang, pick(rng, lang, "N"), ["N", "Sg", "Gen"]))
    words.append(word(lang, pick(rng, lang, "N"), ["N", number, "Nom"]))
    return words, "Pl3" if number == "Pl" else "Sg3"


def finite(rng, lang, cls, agr):
    tense = "Prt" if agr == "Sg3" and rng.random() < 0.25 else "Prs"
    entry = pick(rng, lang, cls)
    trans = "IV" if cls in ("IV", "BE") else "TV"
    return word(lang, entry, ["V", trans, "Ind", tense, agr])


def noun_phrase(rng, lang, case, number=None, possessor=0.0):
    number = number or ("Pl" if rng.random() < 0.3 else "Sg")
    words = []
    if rng.random() < possessor:
        words.append(word(lang, pick(rng, lang, "N"), ["N", "Sg", "Gen"]))
    words.append(word(lang, pick(rng, lang, "N"), ["N", number, case]))
    return words


def maybe_adv(rng, lang, p=0.25):
    return [word(lang, pick(rng, lang, "Adv"), ["Adv"])] if rng.random() < p else []


def sentence_a(rng, lang):
    """SVO."""
    kind = rng.choices(
        ["tv", "ill", "loc", "com", "ess", "ger", "inf", "imp", "adv"],
        [30, 12, 12, 8, 6, 6, 8, 5, 8],
    )[0]
    if kind == "imp":
        words = [word(lang, pick(rng, lang, "TV"), ["V", "TV", "Imprt", "Sg2"])]
        words += noun_phrase(rng, lang, "Acc", possessor=0.2)
        return words + [(".", None, None)] if rng.random() < 0.3 else words + [("!", None, None)]
    subj, agr = subject(rng, lang)
    words = maybe_adv(rng, lang, 0.15) + subj
    if kind == "tv":
        words.append(finite(rng, lang, "TV", agr))
        words += noun_phrase(rng, lang, "Acc", possessor=0.3)
    elif kind in ("ill", "loc", "com"):
        case = {"ill": "Ill", "loc": "Loc", "com": "Com"}[kind]
        words.append(finite(rng, lang, "BE" if kind == "loc" and rng.random() < 0.5 else "IV", agr))
        words += noun_phrase(rng, lang, case, possessor=0.15)
    elif kind == "ess":
        words.append(finite(rng, lang, "IV", agr))
        words.append(word(lang, pick(rng, lang, "N"), ["N", "Ess"]))
    elif kind == "ger":
        words.append(finite(rng, lang, "BE", agr))
        words.append(word(lang, pick(rng, lang, "TV"), ["V", "TV", "Ger"]))
        words += noun_phrase(rng, lang, "Acc")
    elif kind == "inf":
        words.append(finite(rng, lang, "TV", agr))
        trans = rng.choice(["TV", "IV"])
        words.append(word(lang, pick(rng, lang, trans), ["V", trans, "Inf"]))
        if trans == "TV":
            words += noun_phrase(rng, lang, "Acc")
    else:
        words.append(finite(rng, lang, "IV", agr))
    words += maybe_adv(rng, lang, 0.25 if kind != "adv" else 1.0)
    end = "?" if rng.random() < 0.1 else "."
    return words + [(end, None, None)]


def sentence_b(rng, lang):
    """SOV."""
    kind = rng.choices(
        ["tv", "ill", "ine", "ela", "com", "ess", "ger", "pron_obj", "iv"],
        [24, 14, 16, 14, 8, 8, 6, 6, 4],
    )[0]
    subj, agr = subject(rng, lang)
    words = subj
    if kind == "tv":
        words += noun_phrase(rng, lang, "Acc", possessor=0.2)
        words += maybe_adv(rng, lang, 0.2)
        words.append(finite(rng, lang, "TV", agr))
    elif kind in ("ill", "ine", "ela", "com"):
        case = {"ill": "Ill", "ine": "Ine", "ela": "Ela", "com": "Com"}[kind]
        number = "Sg" if case == "Com" else None
        words += noun_phrase(rng, lang, case, number=number, possessor=0.1)
        words += maybe_adv(rng, lang, 0.15)
        words.append(finite(rng, lang, "BE" if kind == "ine" and rng.random() < 0.5 else "IV", agr))
    elif kind == "ess":
        words.append(word(lang, pick(rng, lang, "N"), ["N", "Ess"]))
        words.append(finite(rng, lang, "IV", agr))
    elif kind == "ger":
        words += maybe_adv(rng, lang, 0.7)
        words.append(word(lang, pick(rng, lang, "TV"), ["V", "TV", "Ger"]))
    elif kind == "pron_obj":
        if rng.random() < 0.5:
            words = [word(lang, pick(rng, lang, "P1"), ["Pron", "Pers", "Sg1", "Acc"])]
            words += noun_phrase(rng, lang, "Acc", number="Sg")
            words.append(finite(rng, lang, "TV", "Sg1"))
        else:
            words = [word(lang, pick(rng, lang, "P3B"), ["Pron", "Pers", "Sg3", "Acc"])]
            words.append(finite(rng, lang, "TV", "Sg1"))
            words.append(word(lang, pick(rng, lang, "N"), ["N", "Ess"]))
    else:
        words.append(finite(rng, lang, "IV", agr))
    end = "?" if rng.random() < 0.1 else "."
    return words + [(end, None, None)]


def punct_reading(surface):
    return surface, ["CLB"]


def write_treebank(path, sents):
    with open(path, "w", encoding="utf-8") as f:
        for n, s in enumerate(sents, 1):
            f.write(f"# sent_id = a-{n}\n")
            f.write("# text = " + render_text(s) + "\n")
            for i, (form, lemma, tags) in enumerate(s, 1):
                if lemma is None:
                    lemma, tags = punct_reading(form)
                upos, feats = gold(tags)
                f.write(f"{i}\t{form}\t{lemma}\t{upos}\t_\t{'|'.join(feats) or '_'}\t_\t_\t_\t_\n")
            f.write("\n")


def render_text(s):
    out = ""
    for form, lemma, _ in s:
        if lemma is None and form in PUNCT:
            out += form
        else:
            out += (" " if out else "") + form
    return out


def write_cohorts(path, sents):
    with open(path, "w", encoding="utf-8") as f:
        for s in sents:
            for form, lemma, tags in s:
                if lemma is None:
                    lemma, tags = punct_reading(form)
                f.write(f'"<{form}>"\n\t{lemma}+{"+".join(tags)}\n')
            f.write("\n")


B_TEMPLATES = """\
# Six templates for language B, one pair of lines each.
name: nom-ill-iv
src: (N Sg Nom) (N Sg Ill) (V IV Ind Prs Sg3)
tgt: (N Case=Nom Number=Sing) (N Case=Ill Number=Sing) (V Mood=Ind Number=Sing Person=3 Tense=Pres VerbForm=Fin)

name: nom-adv-ger
src: (N Sg Nom) (Adv) (V TV Ger)
tgt: (N Case=Nom Number=Sing) (Adv) (V VerbForm=Ger)

name: nom-ine
src: (N Sg Nom) (N Sg Ine)
tgt: (N Case=Nom Number=Sing) (N Case=Ine Number=Sing)

name: pron-acc-sg1
src: mannem (N Sg Acc) (V TV Ind Prs Sg1)
tgt: (Pron Case=Acc Number=Sing Person=1 PronType=Prs) (N Case=Acc Number=Sing) (V Mood=Ind Number=Sing Person=1 Tense=Pres VerbForm=Fin)

name: nom-ela-iv
src: (N Sg Nom) (N Sg Ela) (V IV Ind Prs Sg3)
tgt: (N Case=Nom Number=Sing) (N Case=Ela Number=Sing) (V Mood=Ind Number=Sing Person=3 Tense=Pres VerbForm=Fin)

name: pron-sg1-ess
src: altemse (V TV Ind Prs Sg1) (N Ess)
tgt: (Pron Case=Acc Number=Sing Person=3 PronType=Prs) (V Mood=Ind Number=Sing Person=1 Tense=Pres VerbForm=Fin) (N Case=Ess)
"""


def ambiguity(lang, sents):
    index = lang.analyses()
    counts = []
    for s in sents:
        for form, lemma, _ in s:
            counts.append(1 if lemma is None else len(index[form]))
    return sum(counts) / len(counts)


def check(lang, sents):
    index = lang.analyses()
    for s in sents:
        for form, lemma, tags in s:
            if lemma is not None:
                assert (lemma, tuple(tags)) in index[form], (form, lemma, tags)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data"
    rng = random.Random(SEED)
    a = build_a(rng)
    b = build_b(rng)
    a_sents = [sentence_a(rng, a) for _ in range(400)]
    b_sents = [sentence_b(rng, b) for _ in range(150)]
    check(a, a_sents)
    check(b, b_sents)

    a_dir = os.path.join(out, "lang_a")
    b_dir = os.path.join(out, "lang_b")
    a.write(a_dir)
    b.write(b_dir)
    write_treebank(os.path.join(a_dir, "treebank.conllu"), a_sents)
    write_cohorts(os.path.join(b_dir, "gold.cohorts"), b_sents)
    with open(os.path.join(b_dir, "text.txt"), "w", encoding="utf-8") as f:
        for s in b_sents:
            f.write(render_text(s) + "\n")
    with open(os.path.join(b_dir, "templates.txt"), "w", encoding="utf-8") as f:
        f.write(B_TEMPLATES)
    print(f"A: {len(a_sents)} sentences, ambiguity {ambiguity(a, a_sents):.2f}")
    print(f"B: {len(b_sents)} sentences, ambiguity {ambiguity(b, b_sents):.2f}")


if __name__ == "__main__":
    main()
