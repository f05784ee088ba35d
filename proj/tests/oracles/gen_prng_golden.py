"""Independent PCG32 + shuffle oracle. Writes tests/golden/prng_golden.json."""
import json
import pathlib

M64 = (1 << 64) - 1
MULT = 6364136223846793005


class Pcg32:
    def __init__(self, initstate, initseq):
        self.state = 0
        self.inc = ((initseq << 1) | 1) & M64
        self.next()
        self.state = (self.state + initstate) & M64
        self.next()

    def next(self):
        old = self.state
        self.state = (old * MULT + self.inc) & M64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def bounded(self, bound):
        threshold = (2**32 - bound) % bound
        while True:
            r = self.next()
            if r >= threshold:
                return r % bound


STREAMS = {
    "split": 0x73706C6974,
    "fraction": 0x6672616374,
    "shots": 0x73686F7473,
    "test_reserve": 0x7465737472,
}


def permutation(items, seed, stream):
    items = list(items)
    rng = Pcg32(seed, STREAMS[stream])
    for i in range(len(items) - 1, 0, -1):
        j = rng.bounded(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def main():
    raw = []
    for state, seq in [(42, 54), (1, 0), (0, 0), (2**64 - 1, 2**63 + 5)]:
        r = Pcg32(state, seq)
        raw.append({"state": str(state), "seq": str(seq), "out": [r.next() for _ in range(8)]})
    ids = [f"id{i:04d}" for i in range(40)]
    perms = []
    for seed in (1, 2, 3, 12345):
        for stream in STREAMS:
            perms.append({"seed": seed, "stream": stream, "perm": permutation(ids, seed, stream)})
    n = 653
    big = [f"cr{i:04d}" for i in range(n)]
    order = permutation(big, 1, "split")
    tenth = n // 10
    split = {"seed": 1, "n": n, "val": order[:tenth], "test": order[tenth:2 * tenth], "train_size": n - 2 * tenth}
    out = {"oracle": "python pcg32", "raw": raw, "ids": ids, "permutations": perms, "split_653": split}
    path = pathlib.Path(__file__).resolve().parent.parent / "golden" / "prng_golden.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    # published pcg32 demo outputs for initstate 42, initseq 54
    assert raw[0]["out"][:6] == [0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E]


if __name__ == "__main__":
    main()
