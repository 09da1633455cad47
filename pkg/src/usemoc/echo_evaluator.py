"""Identity evaluator speaking the line-delimited JSON protocol.

Replies ``{"y": x, "c": []}`` to every request. Run with
``python -m usemoc.echo_evaluator``.
"""

import json
import sys


def main():
    for line in sys.stdin:
        if not line.strip():
            continue
        x = json.loads(line)["x"]
        print(json.dumps({"y": x, "c": []}), flush=True)


if __name__ == "__main__":
    main()
