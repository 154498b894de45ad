import argparse
import json
from pathlib import Path

from deltaspec.registry import ConstantsRegistry, geometry_from_key


if __name__ == "__main__":
    deltaspec_root_directory = Path(__file__).parent.parent
    default_manifest_path = deltaspec_root_directory / "libs" / "geometries.json"
    default_output_path = deltaspec_root_directory / "libs" / "constants_snapshot.json"

    parser = argparse.ArgumentParser(description="Calibrate the heat-kernel constants of the listed geometries")
    parser.add_argument("--manifest", help="Path to the JSON geometry manifest",
                        default=default_manifest_path)
    parser.add_argument("--output", help="Path to the snapshot file",
                        default=default_output_path)
    parser.add_argument("--extend", action="store_true",
                        help="Keep the constants already in the output file")
    args = parser.parse_args()

    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest file not found: {manifest_path}")

    with open(manifest_path) as f:
        manifest = json.load(f)

    output_path = Path(args.output)
    registry = ConstantsRegistry()
    if args.extend and output_path.exists():
        with open(output_path) as f:
            registry.load_snapshot(json.load(f))

    for entry in manifest['geometries']:
        spec = geometry_from_key(entry)
        constants = registry.heat_kernel_constants(spec)
        print(f"{spec.describe()}: {dict(constants.provenance)}")

    snapshot = registry.snapshot()
    with open(output_path, "w") as f:
        json.dump(snapshot, f, indent=2, sort_keys=True)
        f.write("\n")

    print(f"{len(snapshot['entries'])} geometries written to {output_path}")
