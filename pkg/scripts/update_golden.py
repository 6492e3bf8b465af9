"""Regenerate tests/golden/<problem>.txt from the current `jetvar tasks --machine` output.

Run after an intentional output change, then review the diff before committing.
"""
from pathlib import Path

from jetvar.cli import run_tasks

ROOT = Path(__file__).resolve().parent.parent


def main():
    out_dir = ROOT / "tests" / "golden"
    out_dir.mkdir(exist_ok=True)
    for path in sorted((ROOT / "problems").glob("*.jv")):
        code, text = run_tasks(path.relative_to(ROOT), machine=True)
        if code:
            raise SystemExit(f"{path.name}: exit {code}\n{text}")
        (out_dir / f"{path.stem}.txt").write_text(text + "\n")
        print(f"wrote {path.stem}.txt")


if __name__ == "__main__":
    main()
