"""
This module is called when executing the 'landaulab' command after installing landaulab.
"""

from argparse import ArgumentParser, ArgumentDefaultsHelpFormatter
from pathlib import Path

from landaulab.cli_funcs import model, spectrum, clusters, weyl, kernel, chern, accept

parent_parser = ArgumentParser(
    prog="landaulab",
    formatter_class=ArgumentDefaultsHelpFormatter,
    description="Semiclassical spectra of magnetic Laplacians on flat tori",
)
parent_parser.add_argument(
    "--config",
    type=Path,
    default=Path("configs/default.json"),
    help="JSON run configuration",
)
parent_parser.add_argument(
    "--out",
    type=Path,
    default=None,
    help="Output directory, overrides the 'output' entry of the configuration",
)
parent_parser.add_argument(
    "--seed",
    type=int,
    default=None,
    help="Seed of the Lanczos start vectors, overrides the configuration. Enters the config hash.",
)
parent_parser.add_argument(
    "--threads",
    type=int,
    default=1,
    help="Worker threads for per-k runs",
)
parent_parser.add_argument(
    "--dense-cap",
    type=int,
    default=None,
    help="Largest dimension solved densely, overrides the configuration. Enters the config hash.",
)
parent_parser.add_argument(
    "-v",
    "--verbose",
    action="store_true",
    help="Print more logging messages (INFO level and above)",
)
parent_parser.add_argument(
    "-vv",
    "--very-verbose",
    action="store_true",
    help="Print even more logging messages (DEBUG level and above)",
)

subparsers = parent_parser.add_subparsers(required=True)

model_parser = subparsers.add_parser(
    "model",
    help="Envelope, Weyl density and pointwise model levels.",
    description="Write the envelope Sigma below the cutoff, a table of the Weyl density v and "
    "labelled model levels at sampled sites.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
model_parser.set_defaults(func=model)

spectrum_parser = subparsers.add_parser(
    "spectrum",
    help="Solve for the lattice spectrum of every tensor power.",
    description="Assemble k^-1 Delta_k for every configured k, solve below the cutoff and store "
    "the eigen-data in the cache.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
spectrum_parser.set_defaults(func=spectrum)
spectrum_parser.add_argument(
    "--export-matrix",
    action="store_true",
    help="Also write every assembled operator in Matrix-Market format",
)

clusters_parser = subparsers.add_parser(
    "clusters",
    help="Cluster reports and Riemann-Roch comparisons.",
    description="Attach eigenvalues to the envelope components, compare counts with "
    "Riemann-Roch numbers, fit the distance exponent and check Garding bounds.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
clusters_parser.set_defaults(func=clusters)

weyl_parser = subparsers.add_parser(
    "weyl",
    help="Global and local Weyl laws.",
    description="Compare eigenvalue counts with (k / 2 pi)^n v(lambda) and local counts with "
    "the pointwise multiplicities.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
weyl_parser.set_defaults(func=weyl)

kernel_parser = subparsers.add_parser(
    "kernel",
    help="Projector kernel slices and Gaussian fits.",
    description="Sample |Pi_k(x + xi, x)| along lattice rays for the largest k and fit the "
    "Gaussian decay coefficient.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
kernel_parser.set_defaults(func=kernel)

chern_parser = subparsers.add_parser(
    "chern",
    help="Chern numbers of cluster bundles and reference bands.",
    description="Chern numbers of the cluster bundles of the configuration and of the Harper "
    "bands, with curvature heatmaps.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
chern_parser.set_defaults(func=chern)

accept_parser = subparsers.add_parser(
    "accept",
    help="Run the acceptance suite.",
    description="Run the acceptance criteria with the solver settings of the configuration; "
    "exits nonzero if any criterion fails.",
    formatter_class=ArgumentDefaultsHelpFormatter,
)
accept_parser.set_defaults(func=accept)
accept_parser.add_argument(
    "--only",
    type=int,
    nargs="+",
    default=None,
    help="Criterion numbers to run, all by default",
)


def main() -> int:
    """
    Poetry installs this function to run when executing 'landaulab' on the commandline

    :return: status code
    :rtype: int
    """
    args = parent_parser.parse_args()
    return args.func(args)
