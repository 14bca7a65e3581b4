#!/usr/bin/env python3
"""
CLI for relaysel - Whittle index relay selection experiments
"""

import os
import sys
import argparse
import logging
from dotenv import load_dotenv

from .core.errors import RelaySelError
from .core.model import FailureMode, PolicyName
from .core.whittle import save_table
from .tools.config_loader import load_config
from .tools.table_cache import distinct_relays, precompute_tables
from .tools.experiment_runner import run_scenario


def _banner(title: str):
    print(f"\n{'='*70}")
    print(title)
    print(f"{'='*70}\n")


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if not value:
        return default
    try:
        return int(value)
    except ValueError:
        print(f"⚠️  Ignoring {name}={value!r}: not an integer")
        return default


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Compute Whittle indices and simulate relay selection policies"
    )
    parser.add_argument(
        "command",
        choices=["simulate", "index", "validate"],
        help="Command to run"
    )
    parser.add_argument(
        "--config",
        "-c",
        required=True,
        help="Scenario JSON file"
    )
    parser.add_argument(
        "--out",
        "-o",
        help="Output path prefix for <prefix>.csv and <prefix>.json",
        default=None
    )
    parser.add_argument(
        "--threads",
        "-t",
        type=int,
        help="Worker threads (default: RELAYSEL_THREADS or 1)",
        default=None
    )
    parser.add_argument(
        "--on-fail",
        choices=[m.value for m in FailureMode],
        help="Source behaviour after a failed first hop (default: from the config, else retry)",
        default=None
    )
    parser.add_argument(
        "--cache-dir",
        help="Index table cache directory (default: RELAYSEL_CACHE_DIR or ./output/index-cache)",
        default=None
    )
    parser.add_argument(
        "--export",
        help="With 'index': also write one table file per relay into this directory",
        default=None
    )
    parser.add_argument(
        "--log-level",
        help="Logging level (default: RELAYSEL_LOG_LEVEL or INFO)",
        default=None
    )
    return parser


def main(argv=None):
    """Main CLI entry point"""
    load_dotenv()

    args = build_parser().parse_args(argv)

    level = (args.log_level or os.getenv("RELAYSEL_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    threads = args.threads if args.threads is not None else _env_int("RELAYSEL_THREADS", 1)
    if threads < 1:
        print("❌ Error: --threads must be at least 1")
        sys.exit(1)
    output_dir = os.getenv("RELAYSEL_OUTPUT_DIR", "./output")
    cache_dir = args.cache_dir or os.getenv("RELAYSEL_CACHE_DIR") or os.path.join(output_dir, "index-cache")

    try:
        spec = load_config(args.config)
        if args.on_fail:
            spec = spec.with_on_fail(FailureMode(args.on_fail))

        # ========================================
        # VALIDATE
        # ========================================
        if args.command == "validate":
            _banner("🔍 SCENARIO VALIDATION")
            points = spec.points()
            print(f"✅ Scenario '{spec.name}' is valid")
            print(f"   Relays: {spec.base.M}")
            print(f"   Horizon T: {spec.base.T}")
            print(f"   Sweep points: {len(points)}")
            print(f"   Policies: {', '.join(p.value for p in spec.policies)}")
            print(f"   Seeds: {len(spec.seeds)}")
            unstable = [value for value, config in points if not config.stable]
            if unstable:
                print(f"⚠️  min(l) > max(f) fails at {len(unstable)} point(s); see warnings above")
            print()
            return

        # ========================================
        # INDEX PRECOMPUTATION
        # ========================================
        if args.command == "index" or PolicyName.WHITTLE in spec.policies:
            _banner("📐 PHASE 1: WHITTLE INDEX TABLES")
            relays = distinct_relays(spec)
            print(f"🔢 Distinct relay parameter sets: {len(relays)}")
            print(f"📁 Cache directory: {cache_dir}\n")
            cache = precompute_tables(spec, cache_dir, threads=threads)
            print(f"✅ Computed: {cache.computed}, loaded from cache: {cache.hits}")

            if args.export:
                for i, p in enumerate(relays):
                    path = os.path.join(args.export, f"{spec.name}-relay{i}.json")
                    save_table(cache.get(p), path)
                print(f"📝 Exported {len(relays)} table(s) to {args.export}")

            if args.command == "index":
                print()
                return
        else:
            cache = None

        # ========================================
        # SIMULATION
        # ========================================
        _banner("⚡ PHASE 2: SIMULATION")
        print(f"🧪 Scenario: {spec.name}")
        print(f"🔄 Sweep points: {len(spec.points())}, policies: {len(spec.policies)}, seeds: {len(spec.seeds)}")
        print(f"🧵 Threads: {threads}\n")

        result = run_scenario(
            spec,
            out=args.out,
            output_dir=output_dir,
            cache_dir=cache_dir,
            threads=threads,
            cache=cache,
        )
    except RelaySelError as e:
        print(f"❌ Error: {e}")
        sys.exit(1)

    _banner("🎉 SIMULATION COMPLETE!")
    print(f"📊 Rows written: {len(result.rows)}")
    print(f"📂 Results CSV: {result.csv_path}")
    print(f"📂 Summary JSON: {result.summary_path}")
    print()


if __name__ == "__main__":
    main()
