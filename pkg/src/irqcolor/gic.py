"""GICv2 distributor enable path: ISENABLER/ICENABLER word writes and delivery gating.

Only the per-pin enable bits are modeled. Priorities, targets and the
active/pending state machine are out of scope.
"""

from __future__ import annotations

from typing import Mapping

from .core import ConfigError

WORD_BITS = 32
WORD_MASK = 0xFFFFFFFF


def pin_position(pin: int) -> tuple[int, int]:
    return pin // WORD_BITS, pin % WORD_BITS


class Distributor:
    """Enable bits for a set of routed pins.

    Word ``n`` covers pins ``[32n, 32n + 31]``. Pins come up enabled unless
    ``initially_enabled`` is False. Routing is fixed at construction.
    """

    def __init__(self, routing: Mapping[int, int], initially_enabled: bool = True,
                 words: int | None = None):
        if not routing:
            raise ConfigError("distributor needs at least one routed pin")
        self.routing = dict(routing)
        needed = max(self.routing) // WORD_BITS + 1
        self.words = needed if words is None else words
        if self.words < needed:
            raise ConfigError(f"{self.words} enable words cannot cover pin {max(self.routing)}")
        self.enable_bits = [0] * self.words
        if initially_enabled:
            for pin in self.routing:
                word, bit = pin_position(pin)
                self.enable_bits[word] |= 1 << bit
        self.write_log: list[tuple[str, int, int]] = []

    def _check_word(self, word_index: int) -> None:
        if not 0 <= word_index < self.words:
            raise ConfigError(f"enable word {word_index} not configured (have {self.words})")

    def write_isenabler(self, word_index: int, value: int) -> None:
        """Write-one-to-set."""
        self._check_word(word_index)
        value &= WORD_MASK
        self.enable_bits[word_index] |= value
        self.write_log.append(("ISENABLER", word_index, value))

    def write_icenabler(self, word_index: int, value: int) -> None:
        """Write-one-to-clear."""
        self._check_word(word_index)
        value &= WORD_MASK
        self.enable_bits[word_index] &= ~value & WORD_MASK
        self.write_log.append(("ICENABLER", word_index, value))

    def is_delivery_enabled(self, pin: int) -> bool:
        if pin not in self.routing:
            raise ConfigError(f"pin {pin} is not routed")
        word, bit = pin_position(pin)
        return bool(self.enable_bits[word] >> bit & 1)

    def enable_pin(self, pin: int) -> None:
        if pin not in self.routing:
            raise ConfigError(f"pin {pin} is not routed")
        word, bit = pin_position(pin)
        self.write_isenabler(word, 1 << bit)

    def disable_pin(self, pin: int) -> None:
        if pin not in self.routing:
            raise ConfigError(f"pin {pin} is not routed")
        word, bit = pin_position(pin)
        self.write_icenabler(word, 1 << bit)

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.enable_bits)
