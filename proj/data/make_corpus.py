#!/usr/bin/env python3
# Copyright 2026 The neuronlens Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Generates the bundled English-like corpus from a small stochastic grammar.

The output is released into the public domain. Usage:

    python3 make_corpus.py --tokens 100000 --seed 7 > corpus/train.txt
"""

import argparse
import random

DETS = ["the", "a", "this", "that", "every", "some", "no", "each", "another"]
PLURAL_DETS = ["the", "these", "those", "many", "some", "few", "several", "all"]
ADJS = ["old", "new", "small", "large", "quiet", "busy", "green", "red", "cold",
        "warm", "bright", "dark", "young", "ancient", "narrow", "wide", "strange",
        "simple", "careful", "happy", "tired", "famous", "local", "distant",
        "heavy", "light", "early", "late", "public", "private", "rural", "urban"]
NOUNS = ["man", "woman", "child", "teacher", "farmer", "doctor", "river", "city",
         "village", "house", "road", "bridge", "market", "garden", "school",
         "letter", "book", "story", "ship", "train", "horse", "dog", "cat",
         "bird", "tree", "forest", "mountain", "window", "door", "table", "king",
         "queen", "soldier", "merchant", "sailor", "painter", "friend", "stranger",
         "council", "committee", "report", "plan", "question", "answer", "song",
         "church", "harbor", "field", "valley", "storm", "winter", "summer", "lamp",
         "clock", "coat", "boat", "wall", "tower", "island", "village", "judge"]
PLURAL = {n: n + "s" for n in NOUNS}
PLURAL.update({"man": "men", "woman": "women", "child": "children",
               "city": "cities", "story": "stories", "church": "churches",
               "bus": "buses", "valley": "valleys", "match": "matches"})
NAMES = ["john", "mary", "peter", "anna", "james", "clara", "thomas", "helen",
         "george", "alice", "henry", "emma", "paris", "london", "boston", "rome"]
VERBS_T = [("see", "sees", "saw"), ("find", "finds", "found"),
           ("build", "builds", "built"), ("carry", "carries", "carried"),
           ("watch", "watches", "watched"), ("follow", "follows", "followed"),
           ("visit", "visits", "visited"), ("paint", "paints", "painted"),
           ("answer", "answers", "answered"), ("read", "reads", "read"),
           ("write", "writes", "wrote"), ("sell", "sells", "sold"),
           ("buy", "buys", "bought"), ("leave", "leaves", "left"),
           ("remember", "remembers", "remembered"), ("call", "calls", "called"),
           ("help", "helps", "helped"), ("open", "opens", "opened"),
           ("close", "closes", "closed"), ("describe", "describes", "described")]
VERBS_I = [("sleep", "sleeps", "slept"), ("arrive", "arrives", "arrived"),
           ("wait", "waits", "waited"), ("laugh", "laughs", "laughed"),
           ("sing", "sings", "sang"), ("rest", "rests", "rested"),
           ("return", "returns", "returned"), ("work", "works", "worked"),
           ("travel", "travels", "traveled"), ("listen", "listens", "listened")]
ADVS = ["quickly", "slowly", "quietly", "often", "rarely", "again", "together",
        "carefully", "suddenly", "finally", "there", "today", "yesterday"]
PREPS = ["in", "near", "behind", "across", "under", "over", "beside", "through",
         "along", "toward", "inside", "around"]
MONTHS = ["january", "february", "march", "april", "may", "june", "july",
          "august", "september", "october", "november", "december"]
CONJ = ["and", "but", "because", "while", "although", "so", "when", "until"]
SAY = ["said", "thought", "believed", "wrote", "knew", "heard", "claimed"]


class Grammar:
    def __init__(self, rng):
        self.r = rng

    def pick(self, xs):
        return self.r.choice(xs)

    def chance(self, p):
        return self.r.random() < p

    def noun_phrase(self, plural=False):
        if not plural and self.chance(0.15):
            return [self.pick(NAMES)], False
        words = [self.pick(PLURAL_DETS if plural else DETS)]
        if self.chance(0.45):
            words.append(self.pick(ADJS))
            if self.chance(0.15):
                words += ["and", self.pick(ADJS)]
        noun = self.pick(NOUNS)
        words.append(PLURAL[noun] if plural else noun)
        if self.chance(0.2):
            words += [self.pick(PREPS)] + self.noun_phrase(self.chance(0.3))[0]
        return words, plural

    def time_phrase(self):
        roll = self.r.random()
        if roll < 0.4:
            return ["in", self.pick(MONTHS)]
        if roll < 0.7:
            return ["on", self.pick(MONTHS), str(self.r.randint(1, 31))]
        if roll < 0.85:
            return ["in", str(self.r.randint(1800, 1999))]
        return [str(self.r.randint(2, 60)), self.pick(["days", "years", "weeks"]), "ago"]

    def verb_phrase(self, plural, tense):
        transitive = self.chance(0.65)
        base, third, past = self.pick(VERBS_T if transitive else VERBS_I)
        words = []
        negate = self.chance(0.15)
        if tense == "past":
            words += (["did", "not", base] if negate else [past])
        elif tense == "future":
            words += ["will"] + (["not"] if negate else []) + [base]
        else:
            if negate:
                words += ["do" if plural else "does", "not", base]
            else:
                words.append(base if plural else third)
        if transitive:
            words += self.noun_phrase(self.chance(0.3))[0]
        if self.chance(0.25):
            words.append(self.pick(ADVS))
        if self.chance(0.3):
            words += [self.pick(PREPS)] + self.noun_phrase(self.chance(0.3))[0]
        return words

    def clause(self):
        subject, plural = self.noun_phrase(self.chance(0.3))
        tense = self.pick(["past", "past", "present", "future"])
        words = subject + self.verb_phrase(plural, tense)
        if self.chance(0.2):
            words += self.time_phrase()
        return words

    def sentence(self):
        roll = self.r.random()
        if roll < 0.12:
            words = self.time_phrase() + [","] + self.clause()
        elif roll < 0.24:
            subject, _ = self.noun_phrase()
            words = subject + [self.pick(SAY), "that"] + self.clause()
        elif roll < 0.34:
            aux = self.pick(["did", "will", "can"])
            subject, _ = self.noun_phrase()
            base, _, _ = self.pick(VERBS_T)
            obj, _ = self.noun_phrase(self.chance(0.3))
            return [aux] + subject + [base] + obj + ["?"]
        else:
            words = self.clause()
        if self.chance(0.3):
            words += [","] + [self.pick(CONJ)] + self.clause()
        return words + ["."]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--tokens", type=int, default=100000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    grammar = Grammar(random.Random(args.seed))
    total = 0
    while total < args.tokens:
        words = grammar.sentence()
        total += len(words)
        print(" ".join(words))


if __name__ == "__main__":
    main()
