import re


def normalize(text):
    def clean(word):
        stripped = word.strip(".,!?")
        return stripped.lower()

    words = re.split(r"\s+", text.strip())
    cleaned = [clean(w) for w in words]
    kept = [w for w in cleaned if w]
    return " ".join(kept)


def shout(s):
    loud = s.upper()
    return loud + "!"
