"""Score one pair by hand and check it against the library.

A two-entry phrase table and three 2-d word vectors are enough to follow
every number: the connectivity term sums nPMI weighted by the share of each
utterance the phrases cover, and the content term is a clipped cosine.

    python demos/03_scoring_by_hand.py
"""

from dialfilter.corpus import Utterance, UtterancePair
from dialfilter.phrase_table import npmi, phrase_pairs_from_entries
from dialfilter.scorer import enumerate_phi, s_content, s_frame
from dialfilter.sentvec import FrequencyTable, SentenceEmbedder, WordVectorTable

x, y = "where is it", "at home now"
pair = UtterancePair(0, Utterance.from_text(x), Utterance.from_text(y))

# nPMI from counts: a phrase pair seen 40 times in 1,000 pairs; the table
# below uses round nPMI values so the arithmetic is easy to follow
print(f"npmi(40, 50, 60, 1000) = {npmi(40, 50, 60, 1000):.4f}")
table = phrase_pairs_from_entries([("where is", "at", 40, 0.8), ("it", "home", 12, 0.25)], n=1000)
phi = enumerate_phi(pair.x.tokens, pair.y.tokens, 4, 4)
print(f"{len(phi)} candidate n-gram pairs, {sum(k in phi for k in table.entries)} in the table")
by_hand = 0.8 * (2 / 3) * (1 / 3) + 0.25 * (1 / 3) * (1 / 3)
print(f"s_frame: by hand {by_hand:.5f}, library {s_frame(pair, table):.5f}")

vectors = WordVectorTable.from_dict({"where": [1.0, 0.2], "home": [0.9, 0.5], "at": [0.1, 1.0]})
freqs = FrequencyTable.from_counts({"where": 10, "home": 5, "at": 50, "is": 80, "it": 90, "now": 30})
emb = SentenceEmbedder(vectors, freqs)
print(f"s_content (no component removed): {s_content(pair, emb):.5f}")
