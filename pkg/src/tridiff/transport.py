"""Message passing among three parties with exact communication accounting.

Two interchangeable backends share one interface:

* ``LocalFabric`` — in-process queues, one per directed party pair.
* TCP sockets — one connection per unordered pair, set up by
  :func:`tcp_connect_mesh`; the lower-numbered party listens.

Wire format (TCP): a 10-byte handshake per connection — 4-byte magic
``RSS3``, 1-byte version, 1-byte party id, 4-byte little-endian CRC32 of the
canonical config text — followed by frames of ``[u32 little-endian length]
[payload]``.  Ring elements inside payloads are little-endian u64.

Cost accounting counts *payload* bytes only; framing is a fixed 4 bytes per
message and handshakes are setup traffic, so excluding both keeps the totals
identical across backends.  Rounds are counted at protocol level: every party
calls ``count_round`` at the same lockstep points, one count per maximal batch
of messages with no intervening receive dependency.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

__all__ = [
    "CostReport",
    "CostTracker",
    "HandshakeError",
    "IntegrityError",
    "LocalFabric",
    "Message",
    "ProtocolAbort",
    "TransportError",
    "tcp_connect_mesh",
]

PROTOCOL_MAGIC = b"RSS3"
PROTOCOL_VERSION = 1
FRAME_HEADER_BYTES = 4
N_PARTIES = 3

_LEN = struct.Struct("<I")


class TransportError(RuntimeError):
    """Channel failure; carries the local party and peer for diagnostics."""

    def __init__(self, message, *, party=None, peer=None, sequence=None):
        detail = message
        ctx = []
        if party is not None:
            ctx.append(f"party={party}")
        if peer is not None:
            ctx.append(f"peer={peer}")
        if sequence is not None:
            ctx.append(f"sequence={sequence}")
        if ctx:
            detail = f"{message} ({', '.join(ctx)})"
        super().__init__(detail)
        self.party = party
        self.peer = peer
        self.sequence = sequence


class HandshakeError(TransportError):
    """Peer handshake failed; message names the offending field."""


class IntegrityError(RuntimeError):
    """Replicated-share consistency violated."""


class ProtocolAbort(RuntimeError):
    """A party program failed; wraps the originating error."""

    def __init__(self, party: int, cause: BaseException):
        super().__init__(f"party {party} aborted: {cause!r}")
        self.party = party
        self.cause = cause


@dataclass
class Message:
    """One delivered payload; sequences per directed pair are strictly
    increasing and delivery is in order."""

    sender: int
    receiver: int
    sequence: int
    payload: bytes


# ---------------------------------------------------------------------------
# cost accounting
# ---------------------------------------------------------------------------


class CostTracker:
    """Per-party counters with a protocol label stack.

    Traffic is attributed to the *outermost* label active when it happens, so
    one ``softmax`` call accounts all of its inner multiplications under
    ``softmax``; unlabeled traffic lands in ``other``.
    """

    def __init__(self, party: int):
        self.party = party
        self.bytes_sent = 0
        self.messages_sent = 0
        self.rounds = 0
        self.per_label: dict[str, dict[str, int]] = {}
        self._stack: list[str] = []

    def _bucket(self) -> dict[str, int]:
        name = self._stack[0] if self._stack else "other"
        return self.per_label.setdefault(
            name, {"bytes": 0, "messages": 0, "rounds": 0})

    def on_send(self, payload_len: int) -> None:
        self.bytes_sent += payload_len
        self.messages_sent += 1
        b = self._bucket()
        b["bytes"] += payload_len
        b["messages"] += 1

    def count_round(self) -> None:
        self.rounds += 1
        self._bucket()["rounds"] += 1

    @contextmanager
    def label(self, name: str):
        self._stack.append(name)
        try:
            yield
        finally:
            self._stack.pop()


@dataclass
class CostReport:
    """Bytes/messages per party, a global round count, and a per-protocol
    breakdown whose totals equal the grand totals."""

    bytes_sent: list[int] = field(default_factory=lambda: [0] * N_PARTIES)
    messages_sent: list[int] = field(default_factory=lambda: [0] * N_PARTIES)
    rounds: int = 0
    per_protocol: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_sent)

    @property
    def total_messages(self) -> int:
        return sum(self.messages_sent)

    @classmethod
    def merge(cls, trackers: list[CostTracker]) -> "CostReport":
        report = cls()
        rounds = {t.rounds for t in trackers}
        if len(rounds) != 1:
            raise IntegrityError(f"parties disagree on round count: {rounds}")
        report.rounds = rounds.pop()
        for t in trackers:
            report.bytes_sent[t.party] = t.bytes_sent
            report.messages_sent[t.party] = t.messages_sent
            for name, b in t.per_label.items():
                agg = report.per_protocol.setdefault(
                    name, {"bytes": 0, "messages": 0, "rounds": 0})
                agg["bytes"] += b["bytes"]
                agg["messages"] += b["messages"]
                agg["rounds"] = max(agg["rounds"], b["rounds"])
        return report

    def to_dict(self) -> dict:
        return {
            "bytes_sent": list(self.bytes_sent),
            "messages_sent": list(self.messages_sent),
            "total_bytes": self.total_bytes,
            "total_messages": self.total_messages,
            "rounds": self.rounds,
            "per_protocol": {k: dict(v) for k, v in sorted(self.per_protocol.items())},
        }

    def format_text(self) -> str:
        lines = []
        for i in range(N_PARTIES):
            lines.append(f"bytes_sent.party{i}={self.bytes_sent[i]}")
        for i in range(N_PARTIES):
            lines.append(f"messages_sent.party{i}={self.messages_sent[i]}")
        lines.append(f"total_bytes={self.total_bytes}")
        lines.append(f"total_messages={self.total_messages}")
        lines.append(f"rounds={self.rounds}")
        for name, b in sorted(self.per_protocol.items()):
            lines.append(
                f"protocol.{name}=bytes:{b['bytes']},messages:{b['messages']},"
                f"rounds:{b['rounds']}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# local (in-process) backend
# ---------------------------------------------------------------------------

_CLOSED = object()


class LocalFabric:
    """Queues for all directed party pairs, shared by three in-process
    parties.  Also keeps an instrumented per-pair byte log so tests can audit
    that counted bytes equal bytes actually written."""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout
        self.queues = {
            (i, j): queue.SimpleQueue()
            for i in range(N_PARTIES)
            for j in range(N_PARTIES)
            if i != j
        }
        self.wire_bytes = {pair: 0 for pair in self.queues}
        self.wire_messages = {pair: 0 for pair in self.queues}
        self._lock = threading.Lock()
        self._closed = False

    def comm(self, party: int, tracker: CostTracker | None = None) -> "LocalComm":
        return LocalComm(self, party, tracker or CostTracker(party))

    def close(self) -> None:
        """Wake every pending receive with a channel-closed error."""
        with self._lock:
            if self._closed:
                return
            self._closed = True
        for q in self.queues.values():
            q.put(_CLOSED)


class LocalComm:
    def __init__(self, fabric: LocalFabric, party: int, tracker: CostTracker):
        self.fabric = fabric
        self.party = party
        self.cost = tracker
        self._send_seq = {j: 0 for j in range(N_PARTIES) if j != party}
        self._recv_seq = {j: 0 for j in range(N_PARTIES) if j != party}

    def send(self, dst: int, payload: bytes) -> None:
        if self.fabric._closed:
            raise TransportError("fabric closed", party=self.party, peer=dst)
        seq = self._send_seq[dst] = self._send_seq[dst] + 1
        pair = (self.party, dst)
        self.fabric.queues[pair].put((seq, bytes(payload)))
        with self.fabric._lock:
            self.fabric.wire_bytes[pair] += len(payload)
            self.fabric.wire_messages[pair] += 1
        self.cost.on_send(len(payload))

    def recv(self, src: int) -> bytes:
        try:
            item = self.fabric.queues[(src, self.party)].get(
                timeout=self.fabric.timeout)
        except queue.Empty:
            raise TransportError("receive timed out", party=self.party,
                                 peer=src) from None
        if item is _CLOSED:
            raise TransportError("peer channel closed", party=self.party,
                                 peer=src)
        seq, payload = item
        expected = self._recv_seq[src] + 1
        if seq != expected:
            raise TransportError("out-of-order delivery", party=self.party,
                                 peer=src, sequence=seq)
        self._recv_seq[src] = seq
        return payload

    def count_round(self) -> None:
        self.cost.count_round()

    def label(self, name: str):
        return self.cost.label(name)

    def close(self) -> None:  # parity with the TCP comm
        pass


# ---------------------------------------------------------------------------
# TCP backend
# ---------------------------------------------------------------------------


def _parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad address {addr!r}, expected host:port")
    return host, int(port)


def _recv_exact(sock: socket.socket, n: int, *, party, peer) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("connection closed mid-message",
                                 party=party, peer=peer)
        buf += chunk
    return buf


def _handshake(sock: socket.socket, party: int, expect_peer: int,
               config_crc: int) -> None:
    sock.sendall(PROTOCOL_MAGIC + bytes([PROTOCOL_VERSION, party])
                 + _LEN.pack(config_crc))
    data = _recv_exact(sock, 10, party=party, peer=expect_peer)
    if data[:4] != PROTOCOL_MAGIC:
        raise HandshakeError("bad magic", party=party, peer=expect_peer)
    if data[4] != PROTOCOL_VERSION:
        raise HandshakeError(
            f"protocol version mismatch: ours {PROTOCOL_VERSION}, peer {data[4]}",
            party=party, peer=expect_peer)
    if data[5] != expect_peer:
        raise HandshakeError(
            f"party id mismatch: expected {expect_peer}, got {data[5]}",
            party=party, peer=expect_peer)
    peer_crc = _LEN.unpack(data[6:10])[0]
    if peer_crc != config_crc:
        raise HandshakeError(
            f"config hash mismatch: ours {config_crc:#010x}, "
            f"peer {peer_crc:#010x}", party=party, peer=expect_peer)


def tcp_connect_mesh(party: int, addresses: list[str], config_crc: int,
                     *, timeout: float = 30.0) -> dict[int, socket.socket]:
    """Full mesh: for each pair the lower id listens, the higher id dials.

    ``addresses[i]`` is party i's listen endpoint.  Dialing retries until
    ``timeout`` so start order does not matter.
    """
    lower = [p for p in range(N_PARTIES) if p < party]
    higher = [p for p in range(N_PARTIES) if p > party]
    socks: dict[int, socket.socket] = {}
    listener = None
    try:
        if higher:
            host, port = _parse_addr(addresses[party])
            listener = socket.create_server((host, port))
            listener.settimeout(timeout)
        for peer in lower:
            deadline = time.monotonic() + timeout
            last_err = None
            while True:
                try:
                    s = socket.create_connection(_parse_addr(addresses[peer]),
                                                 timeout=1.0)
                    break
                except OSError as exc:
                    last_err = exc
                    if time.monotonic() >= deadline:
                        raise TransportError(
                            f"connect timeout to party {peer}: {last_err}",
                            party=party, peer=peer) from exc
                    time.sleep(0.05)
            socks[peer] = s
        pending = set(higher)
        while pending:
            try:
                s, _ = listener.accept()
            except socket.timeout:
                raise TransportError(
                    f"timed out waiting for parties {sorted(pending)}",
                    party=party) from None
            s.settimeout(timeout)
            data = _recv_exact(s, 10, party=party, peer=None)
            if data[:4] != PROTOCOL_MAGIC:
                raise HandshakeError("bad magic", party=party)
            if data[4] != PROTOCOL_VERSION:
                raise HandshakeError(
                    f"protocol version mismatch: ours {PROTOCOL_VERSION}, "
                    f"peer {data[4]}", party=party)
            peer = data[5]
            if peer not in pending:
                raise HandshakeError(f"unexpected party id {peer}",
                                     party=party)
            peer_crc = _LEN.unpack(data[6:10])[0]
            if peer_crc != config_crc:
                raise HandshakeError(
                    f"config hash mismatch: ours {config_crc:#010x}, "
                    f"peer {peer_crc:#010x}", party=party, peer=peer)
            s.sendall(PROTOCOL_MAGIC + bytes([PROTOCOL_VERSION, party])
                      + _LEN.pack(config_crc))
            socks[peer] = s
            pending.discard(peer)
        for peer in lower:
            socks[peer].settimeout(timeout)
            _handshake(socks[peer], party, peer, config_crc)
        return socks
    except BaseException:
        for s in socks.values():
            s.close()
        raise
    finally:
        if listener is not None:
            listener.close()


class TcpComm:
    """Framed messaging over an established socket mesh."""

    def __init__(self, party: int, socks: dict[int, socket.socket],
                 tracker: CostTracker | None = None):
        self.party = party
        self.socks = socks
        self.cost = tracker or CostTracker(party)
        self._send_seq = {j: 0 for j in socks}
        self._recv_seq = {j: 0 for j in socks}

    def send(self, dst: int, payload: bytes) -> None:
        payload = bytes(payload)
        try:
            self.socks[dst].sendall(_LEN.pack(len(payload)) + payload)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}", party=self.party,
                                 peer=dst) from exc
        self._send_seq[dst] += 1
        self.cost.on_send(len(payload))

    def recv(self, src: int) -> bytes:
        try:
            header = _recv_exact(self.socks[src], FRAME_HEADER_BYTES,
                                 party=self.party, peer=src)
            (length,) = _LEN.unpack(header)
            payload = _recv_exact(self.socks[src], length,
                                  party=self.party, peer=src)
        except socket.timeout:
            raise TransportError("receive timed out", party=self.party,
                                 peer=src) from None
        self._recv_seq[src] += 1
        return payload

    def count_round(self) -> None:
        self.cost.count_round()

    def label(self, name: str):
        return self.cost.label(name)

    def close(self) -> None:
        for s in self.socks.values():
            try:
                s.close()
            except OSError:
                pass
