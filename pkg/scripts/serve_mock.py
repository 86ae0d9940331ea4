"""Serve the deterministic mock chat model on a loopback port until interrupted.

Point the CLI at it with ``--endpoint http://127.0.0.1:PORT``.
"""
from __future__ import annotations

import argparse
import threading

from epiextract.mock import MockChatModel


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--fail-first", type=int, default=0, help="answer the first N requests with HTTP 500")
    args = ap.parse_args()
    with MockChatModel(fail_first=args.fail_first).serve(port=args.port) as url:
        print(f"mock endpoint at {url}", flush=True)
        try:
            threading.Event().wait()
        except KeyboardInterrupt:
            pass


if __name__ == "__main__":
    main()
