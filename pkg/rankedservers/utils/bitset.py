from math import ceil

WORD_BITS = 64
FULL_WORD = (1 << WORD_BITS) - 1


def _lowest_clear_bit(word):
    """Position of the lowest zero bit of a word that is not all ones."""
    return ((~word) & (word + 1)).bit_length() - 1


class BusyBitset:
    """
    A growable bit array with a one-word-per-64-blocks summary level.

    Bit ``i`` of ``words[b]`` is position ``64 * b + i``. Bit ``j`` of
    ``summary[k]`` is set exactly when block ``64 * k + j`` is completely full,
    so the lowest clear position is found by skipping whole full blocks 64 at a
    time and then looking at a single word.
    """

    def __init__(self, capacity=WORD_BITS):
        if capacity < 1:
            raise ValueError("capacity must be a positive integer.")
        n_blocks = ceil(capacity / WORD_BITS)
        self._words = [0] * n_blocks
        self._summary = [0] * ceil(n_blocks / WORD_BITS)
        self._count = 0

    @property
    def capacity(self):
        return len(self._words) * WORD_BITS

    def grow(self, min_capacity):
        """Double the capacity until it holds ``min_capacity`` positions."""
        new_blocks = len(self._words)
        while new_blocks * WORD_BITS < min_capacity:
            new_blocks *= 2
        extra = new_blocks - len(self._words)
        if extra <= 0:
            return
        self._words.extend([0] * extra)
        extra_summary = ceil(new_blocks / WORD_BITS) - len(self._summary)
        if extra_summary > 0:
            self._summary.extend([0] * extra_summary)

    def test(self, position):
        block, bit = divmod(position, WORD_BITS)
        if block >= len(self._words):
            return False
        return (self._words[block] >> bit) & 1 == 1

    def set(self, position):
        block, bit = divmod(position, WORD_BITS)
        if block >= len(self._words):
            self.grow(position + 1)
        mask = 1 << bit
        word = self._words[block]
        if word & mask:
            return
        word |= mask
        self._words[block] = word
        self._count += 1
        if word == FULL_WORD:
            self._summary[block >> 6] |= 1 << (block & 63)

    def clear(self, position):
        block, bit = divmod(position, WORD_BITS)
        if block >= len(self._words):
            return
        mask = 1 << bit
        word = self._words[block]
        if not word & mask:
            return
        if word == FULL_WORD:
            self._summary[block >> 6] &= ~(1 << (block & 63))
        self._words[block] = word & ~mask
        self._count -= 1

    def first_clear(self):
        """Lowest clear position; ``capacity`` when every position is set."""
        n_blocks = len(self._words)
        for k, summary_word in enumerate(self._summary):
            if summary_word == FULL_WORD:
                continue
            block = k * WORD_BITS + _lowest_clear_bit(summary_word)
            if block >= n_blocks:
                break
            return block * WORD_BITS + _lowest_clear_bit(self._words[block])
        return self.capacity

    def popcount(self):
        """Count set bits by scanning the words (the cached count is ``len``)."""
        return sum(word.bit_count() for word in self._words)

    def positions(self):
        for block, word in enumerate(self._words):
            while word:
                low = word & -word
                yield block * WORD_BITS + low.bit_length() - 1
                word ^= low

    def __len__(self):
        return self._count

    def __contains__(self, position):
        return self.test(position)

    def __repr__(self):
        if self._count <= 16:
            return "BusyBitset([" + ",".join(str(p) for p in self.positions()) + "])"
        return f"BusyBitset(capacity={self.capacity}, set={self._count})"
