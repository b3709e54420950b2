"""Reference binary range coder over an unbounded integer interval.

Keeps the lower interval bound as one arbitrary precision integer, so carries
never need explicit handling. Prints the payload of the golden sequence used
by the range coder regression test.
"""

TOP = 1 << 24


def encode(bits, probs):
    low = 0
    rng = (1 << 32) - 1
    shifts = 0
    for bit, p in zip(bits, probs):
        r1 = min(max((rng * p) >> 16, 1), rng - 1)
        if bit:
            rng = r1
        else:
            low += r1
            rng -= r1
        while rng < TOP:
            rng <<= 8
            low <<= 8
            shifts += 1
    # The interval [low, low + rng) never reaches 2^32 * 256^shifts, so the
    # payload is low written out in full.
    return low.to_bytes(shifts + 4, "big")


def golden_sequence():
    bits = [(i * 7 + 3) % 5 < 2 for i in range(32)]
    probs = [1 + (i * 40503) % 65535 for i in range(32)]
    return bits, probs


def carry_sequence():
    bits = [i % 9 == 8 for i in range(48)]
    probs = [60000 if i % 9 != 8 else 2000 for i in range(48)]
    return bits, probs


if __name__ == "__main__":
    for bits, probs in (golden_sequence(), carry_sequence()):
        print(encode(bits, probs).hex())
