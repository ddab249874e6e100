"""Reference PRNG trace for split sampling.

Independent Python implementation of the documented generator:
splitmix64 seeding -> xoshiro256** -> Fisher-Yates from the back with
j = below(i + 1) (rejection sampling), then contiguous train/dev/test blocks.
Prints the golden assignment for a 10-sentence pool, spec (6, 2, 2), seed 42,
plus the first raw outputs for seed 42.
"""
M = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & M
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return state, z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M


class Xoshiro:
    def __init__(self, seed):
        self.s = []
        st = seed
        for _ in range(4):
            st, v = splitmix64(st)
            self.s.append(v)

    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & M, 7) * 9) & M
        t = (s[1] << 17) & M
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def below(self, n):
        threshold = ((1 << 64) - n) % n
        while True:
            x = self.next()
            if x >= threshold:
                return x % n


def shuffle(items, rng):
    for i in range(len(items), 1, -1):
        j = rng.below(i)
        items[i - 1], items[j] = items[j], items[i - 1]


if __name__ == "__main__":
    raw = Xoshiro(42)
    print("first outputs seed 42:", [hex(raw.next()) for _ in range(4)])
    pool = list(range(10))
    shuffle(pool, Xoshiro(42))
    print("train", pool[:6])
    print("dev", pool[6:8])
    print("test", pool[8:10])
