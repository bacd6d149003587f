"""Channels between master and workers.

Two flavours:

* in-process -- queue-backed channels carrying message objects; the master
  additionally gets a fixed consumption order so runs are reproducible.
* loopback sockets -- real TCP on 127.0.0.1 speaking the framed wire
  protocol; arrival order is whatever the network delivers.

Both present the same master-side surface: ``wait_for_workers()``,
``send(worker_id, msg)``, a shared ``inbox`` of (worker_id, message) pairs
where message None means the worker is gone, and ``consumption_order``.
"""

from __future__ import annotations

import queue
import socket
import threading

from .wire import Message, Register, recv_message, send_message

__all__ = [
    "InProcessWorkerChannel",
    "InProcessMasterTransport",
    "SocketWorkerChannel",
    "LoopbackMasterTransport",
    "connect_worker",
    "build_in_process",
]

ACCEPT_TIMEOUT = 30.0


class InProcessWorkerChannel:
    def __init__(self, worker_id: int, inbox: queue.Queue, master_inbox: queue.Queue):
        self.worker_id = worker_id
        self._inbox = inbox
        self._master_inbox = master_inbox
        self._closed = False

    def recv(self) -> Message | None:
        msg = self._inbox.get()
        return msg

    def send(self, msg: Message) -> None:
        self._master_inbox.put((self.worker_id, msg))

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._master_inbox.put((self.worker_id, None))


class InProcessMasterTransport:
    def __init__(self, n: int, consumption_order: list[int] | None = None):
        self.n = n
        self.inbox: queue.Queue = queue.Queue()
        self.consumption_order = consumption_order
        self._worker_inboxes = {wid: queue.Queue() for wid in range(n)}
        self.worker_ids: list[int] = []

    def channel_for(self, worker_id: int) -> InProcessWorkerChannel:
        return InProcessWorkerChannel(
            worker_id, self._worker_inboxes[worker_id], self.inbox
        )

    def wait_for_workers(self) -> list[int]:
        ids = []
        for _ in range(self.n):
            wid, msg = self.inbox.get(timeout=ACCEPT_TIMEOUT)
            if not isinstance(msg, Register) or msg.worker_id != wid:
                raise RuntimeError(f"expected registration from worker {wid}, got {msg!r}")
            ids.append(wid)
        self.worker_ids = sorted(ids)
        return self.worker_ids

    def send(self, worker_id: int, msg: Message) -> None:
        self._worker_inboxes[worker_id].put(msg)

    def close(self) -> None:
        pass


def build_in_process(
    n: int, consumption_order: list[int] | None = None
) -> InProcessMasterTransport:
    return InProcessMasterTransport(n, consumption_order)


class SocketWorkerChannel:
    def __init__(self, sock: socket.socket):
        self._sock = sock

    def recv(self) -> Message | None:
        try:
            return recv_message(self._sock)
        except OSError:
            return None

    def send(self, msg: Message) -> None:
        send_message(self._sock, msg)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def connect_worker(host: str, port: int) -> SocketWorkerChannel:
    sock = socket.create_connection((host, port))
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketWorkerChannel(sock)


class LoopbackMasterTransport:
    """TCP master endpoint; one reader thread per accepted worker."""

    def __init__(self, n: int, host: str = "127.0.0.1", port: int = 0):
        self.n = n
        self.inbox: queue.Queue = queue.Queue()
        self.consumption_order = None
        self._server = socket.create_server((host, port))
        self._server.settimeout(ACCEPT_TIMEOUT)
        self.host, self.port = self._server.getsockname()[:2]
        self._socks: dict[int, socket.socket] = {}
        self._readers: list[threading.Thread] = []
        self.worker_ids: list[int] = []

    def wait_for_workers(self) -> list[int]:
        for _ in range(self.n):
            conn, _addr = self._server.accept()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            first = recv_message(conn)
            if not isinstance(first, Register):
                raise RuntimeError(f"expected Register as first frame, got {first!r}")
            wid = first.worker_id
            if wid in self._socks:
                raise RuntimeError(f"duplicate registration for worker {wid}")
            self._socks[wid] = conn
            reader = threading.Thread(
                target=self._read_loop, args=(wid, conn), daemon=True
            )
            reader.start()
            self._readers.append(reader)
        self.worker_ids = sorted(self._socks)
        return self.worker_ids

    def _read_loop(self, wid: int, conn: socket.socket) -> None:
        try:
            while True:
                msg = recv_message(conn)
                if msg is None:
                    break
                self.inbox.put((wid, msg))
        except OSError:
            pass
        except Exception:
            pass
        finally:
            self.inbox.put((wid, None))

    def send(self, worker_id: int, msg: Message) -> None:
        sock = self._socks.get(worker_id)
        if sock is None:
            return
        try:
            send_message(sock, msg)
        except OSError:
            pass  # reader thread reports the disconnect

    def close(self) -> None:
        for sock in self._socks.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
        self._server.close()
        for reader in self._readers:
            reader.join(timeout=5.0)
