"""Prompt curation and synonym augmentation on a toy caption corpus."""

from attnforge.masks import ClassDef, ClassTable
from attnforge.prompts import (SynonymTable, attach_scores, augment, curate,
                               filter_by_score)

table = ClassTable(classes=(
    ClassDef(1, "cat", ("cat", "cats")),
    ClassDef(2, "dog", ("dog", "dogs")),
))
corpus = [
    "a cat stretching in the sun",
    "my dog loves the park",
    "a carpet is not an animal",   # substring, must not match
    "two cats and one dog",
    "a rainy day in the city",     # no class word
]

records = curate(corpus, table)
print(f"curated {len(records)} of {len(corpus)} captions:")
for r in records:
    spans = ", ".join(f"{m.matched_word}@{m.start}" for m in r.matches)
    print(f"  {r.text!r}  [{spans}]")

synonyms = SynonymTable(words={1: ("kitten", "feline"), 2: ("puppy",)})
augmented = augment(records, synonyms, policy="one_per_synonym")
print(f"\naugmented to {len(augmented)} records:")
for r in augmented:
    tag = "" if r.origin == "raw" else f"  <- #{r.parent_index}"
    print(f"  {r.text!r}{tag}")

# scores would normally come from an external alignment model
scored = attach_scores(augmented,
                       {i: 1.0 - 0.07 * i for i in range(len(augmented))})
best = filter_by_score(scored, k=4)
print(f"\ntop 4 by score: {[r.text for r in best]}")
