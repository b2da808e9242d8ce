#!/usr/bin/env python3
"""Regenerates the synthetic fixtures under fixtures/.

The corpus follows the per-type proportions of the annotated corpus scaled
down to a few hundred tweets, with a higher harassing rate so that every
type has enough harassing examples for ten-fold cross-validation. Each type
has its own topic words and its own insults, so the signal is plantable and
known in advance.

Usage: python3 scripts/make_fixtures.py [fixtures_dir]
"""

import csv
import json
import random
import sys
from pathlib import Path

TYPES = ["sexual", "racial", "appearance", "intellectual", "political"]

# (annotated, harassing) per type
FULL = {
    "sexual": (38, 15),
    "racial": (49, 20),
    "appearance": (48, 19),
    "intellectual": (48, 20),
    "political": (57, 22),
}
MINI = {
    "sexual": (4, 1),
    "racial": (5, 2),
    "appearance": (5, 2),
    "intellectual": (5, 2),
    "political": (5, 1),
}

TOPIC = {
    "sexual": ["dating", "girlfriend", "boyfriend", "kiss", "bed", "romance", "flirting", "lingerie", "hookup", "date"],
    "racial": ["immigrants", "border", "culture", "accent", "foreigners", "heritage", "skin", "ethnic", "refugees", "religion"],
    "appearance": ["hair", "face", "dress", "photo", "selfie", "makeup", "weight", "outfit", "teeth", "nose"],
    "intellectual": ["school", "exam", "degree", "book", "grammar", "homework", "college", "math", "spelling", "teacher"],
    "political": ["vote", "election", "senate", "policy", "democrats", "republicans", "campaign", "president", "congress", "ballot"],
}
INSULT = {
    "sexual": ["skank", "tramp", "hussy", "floozy", "slutty", "easy"],
    "racial": ["invaders", "savages", "vermin", "parasites", "subhuman", "deport"],
    "appearance": ["ugly", "fat", "hideous", "gross", "pig", "disgusting"],
    "intellectual": ["stupid", "idiot", "moron", "dumb", "braindead", "illiterate"],
    "political": ["traitor", "crook", "shill", "treason", "corrupt", "liar"],
}
GENERIC_INSULT = ["shut", "hate", "trash", "loser", "pathetic", "worthless"]
POSITIVE = ["thanks", "love", "great", "agree", "support", "nice", "congrats", "proud", "happy", "interesting"]
FILLER = ["the", "a", "is", "so", "you", "your", "i", "this", "that", "and", "to", "of", "just", "really",
          "what", "my", "we", "they", "are", "be", "not", "never", "no", "she", "he"]


def tweet_tokens(rng, htype, harassing):
    words = rng.sample(TOPIC[htype], rng.randint(2, 3))
    if harassing:
        n_insults = 1 if rng.random() < 0.2 else rng.randint(2, 3)
        words += [rng.choice(INSULT[htype]) for _ in range(n_insults)]
        if rng.random() < 0.5:
            words.append(rng.choice(GENERIC_INSULT))
        if rng.random() < 0.15:
            words.append(rng.choice(POSITIVE))
    else:
        words += rng.sample(POSITIVE, rng.randint(1, 2))
        if rng.random() < 0.15:
            words.append(rng.choice(GENERIC_INSULT))
        if rng.random() < 0.05:
            words.append(rng.choice(INSULT[htype]))
    words += [rng.choice(FILLER) for _ in range(rng.randint(3, 5))]
    rng.shuffle(words)
    return words


def render(rng, words):
    text = " ".join(words)
    if rng.random() < 0.4:
        text = "@user " + text
    if rng.random() < 0.2:
        text += " #" + rng.choice(words)
    if rng.random() < 0.1:
        text += " https://t.co/x" + str(rng.randint(100, 999))
    if rng.random() < 0.3:
        text = text[0].upper() + text[1:] + rng.choice(["!", "!!", ".", "?"])
    return text


def votes_for(rng, harassing):
    agree, disagree = ("yes", "no") if harassing else ("no", "yes")
    votes = [agree, agree, agree]
    if rng.random() < 0.25:
        votes[rng.randrange(3)] = disagree if rng.random() < 0.8 else "other"
    return "|".join(votes)


def write_corpus(path, counts, rng, prefix):
    rows = []
    manifest = {}
    for htype in TYPES:
        total, harassing = counts[htype]
        manifest[htype] = {"annotated": total, "harassing": harassing, "nonharassing": total - harassing}
        for i in range(total):
            is_h = i < harassing
            rows.append({
                "id": f"{prefix}{htype[:3]}{i:03d}",
                "text": render(rng, tweet_tokens(rng, htype, is_h)),
                "type": htype,
                "label": "harassing" if is_h else "nonharassing",
                "votes": votes_for(rng, is_h),
            })
    rng.shuffle(rows)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["id", "text", "type", "label", "votes"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    manifest["combined"] = {
        k: sum(manifest[t][k] for t in TYPES) for k in ("annotated", "harassing", "nonharassing")
    }
    return manifest


def write_sentences(path, rng, n):
    with open(path, "w") as f:
        for _ in range(n):
            htype = rng.choice(TYPES)
            words = tweet_tokens(rng, htype, rng.random() < 0.5)
            f.write(" ".join(words) + "\n")


LEXICON = {
    "sexual": ["skank", "tramp", "hussy", "floozy", "slut*", "easy"],
    "racial": ["invader*", "savage*", "vermin", "parasite*", "subhuman", "deport*"],
    "appearance": ["ugl*", "fat", "hideous", "gross", "pig", "disgust*"],
    "intellectual": ["stupid*", "idiot*", "moron*", "dumb*", "braindead", "illiterate"],
    "political": ["traitor*", "crook*", "shill*", "treason", "corrupt*", "liar*"],
    "generic": ["shut", "hate*", "trash*", "loser*", "pathetic", "worthless"],
    "i": ["i", "i'm", "me", "my", "mine"],
    "we": ["we", "us", "our"],
    "you": ["you", "you're", "your*", "u"],
    "shehe": ["she", "he", "her", "him", "his"],
    "they": ["they", "them", "their*"],
    "negate": ["not", "never", "no", "don't", "can't"],
    "posemo": ["love*", "great", "nice", "happy", "proud", "thank*", "congrat*", "interest*"],
    "negemo": ["hate*", "ugl*", "disgust*", "pathetic", "worthless", "gross"],
    "anger": ["hate*", "shut", "traitor*", "treason"],
    "assent": ["agree*", "support*", "yes", "ok"],
    "body": ["hair", "face", "teeth", "nose", "skin", "weight"],
    "sexuality": ["dating", "kiss*", "romance", "flirt*", "lingerie", "hookup", "bed"],
    "school": ["school*", "exam*", "degree*", "book*", "grammar", "homework", "college", "math", "spelling", "teacher*"],
    "politics": ["vote*", "election*", "senate", "polic*", "democrat*", "republican*", "campaign*", "president*", "congress", "ballot*"],
}


def write_lexicon(path):
    with open(path, "w") as f:
        f.write("# Demonstration category lexicon for the synthetic fixtures.\n")
        for name, patterns in LEXICON.items():
            f.write(f"[{name}]\n")
            for p in patterns:
                f.write(p + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20181)
    manifest = {
        "corpus.csv": write_corpus(out / "corpus.csv", FULL, rng, "t"),
        "corpus_24.csv": write_corpus(out / "corpus_24.csv", MINI, rng, "m"),
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    write_sentences(out / "sentences.txt", rng, 6000)
    write_lexicon(out / "lexicon.txt")
    with open(out / "stoplist.txt", "w") as f:
        f.write("# Function words ignored by frequency analysis.\n")
        f.write("\n".join(sorted(set(FILLER) | {"<usr>", "<url>"})) + "\n")


if __name__ == "__main__":
    main()
