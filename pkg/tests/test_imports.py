import importlib

import pytest

PACKAGES = [
    "src.tensor",
    "src.attention",
    "src.cae",
    "src.pod",
    "src.rom",
    "src.data",
    "src.evaluation",
    "src.cli",
    "src.utils",
]


@pytest.mark.parametrize("name", PACKAGES)
def test_imports(name):
    """Every package imports cleanly and exports what it declares."""
    module = importlib.import_module(name)
    missing = [symbol for symbol in getattr(module, "__all__", []) if not hasattr(module, symbol)]
    assert missing == []


def test_cli_entry_point_builds_parser():
    from src.cli import build_parser

    parser = build_parser()
    args = parser.parse_args(["--seed", "2", "describe"])
    assert args.seed == 2 and args.command == "describe"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
