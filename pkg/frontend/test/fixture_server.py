"""Start the annotation service over the six-sentence demo corpus.

Used by the frontend end-to-end tests; prints READY once serving.

Usage: python3 fixture_server.py <port> <data_dir>
"""
import json
import sys
import threading
from pathlib import Path

import uvicorn

from rulescout.service import create_app

ROWS = [
    (1, "What is the best way to get to the city?", True),
    (2, "Breakfast is served from 7 am.", False),
    (3, "Best way to reach the airport?", True),
    (4, "Our pool opens at 9 am.", False),
    (5, "I would like a late checkout.", False),
    (6, "The best way to go to the beach?", True),
]


def main() -> None:
    port = int(sys.argv[1])
    data_dir = Path(sys.argv[2])
    data_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = data_dir / "example-src.jsonl"
    with open(corpus_path, "w") as fh:
        for sid, text, label in ROWS:
            fh.write(json.dumps({"id": sid, "text": text, "label": label}) + "\n")
    app = create_app(data_dir)
    app.state.rulescout.register_corpus("example", corpus_path)

    def announce():
        print("READY", flush=True)

    threading.Timer(0.8, announce).start()
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
