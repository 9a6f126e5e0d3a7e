"""String tools used by the matcher: normalization, phonetic codes, similarities."""

from citematch.strsim import (
    jaccard,
    levenshtein,
    levenshtein_similarity,
    longest_common_substring,
    token_levenshtein_similarity,
    weighted_jaccard,
)
from citematch.textnorm import cologne_encode, extract_year, normalize

# normalization lowercases, strips punctuation and splits hyphenated names
print(normalize("Müller-Lüdenscheidt, H.: Soziale Ungleichheit.").tokens)

# spelling variants of German surnames share a phonetic code
for name in ["Meier", "Meyer", "Maier", "Mayr", "Müller", "Möller", "Schmidt", "Schmitt"]:
    print(f"{name:10s} {cologne_encode(name)}")

# the year is the first plausible 4-digit number that is not part of a range
print(extract_year("Weber, M. (1922b): Wirtschaft und Gesellschaft. S. 1123-1144"))
print(extract_year("S. 1123 - 1144"))  # page range only -> None

a, b = "soziale ungleichheit", "soziale ungleichheiten in deutschland"
print("edit distance       ", levenshtein(a, b))
print("char similarity     ", round(levenshtein_similarity(a, b), 3))
print("token similarity    ", round(token_levenshtein_similarity(a.split(), b.split()), 3))
print("common substring    ", longest_common_substring(a, b))
print("jaccard             ", round(jaccard(a.split(), b.split()), 3))

# surnames weighted by how sure the segmenter was that they are surnames;
# an uncertain match counts for less than a certain one
ref_names = {"müller": 0.8, "meier": 0.9}
rec_names = {"müller", "meier", "schulz", "weber"}
print("plain jaccard   ", jaccard(ref_names.keys(), rec_names))
print("weighted jaccard", weighted_jaccard(ref_names, rec_names))
