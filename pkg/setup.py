import os

from setuptools import find_packages, setup

# We use the README as the long_description
readme_path = os.path.join(os.path.dirname(__file__), "README.rst")
with open(readme_path) as fp:
    long_description = fp.read()

setup(
    name="lmmgrid",
    version="1.0",
    description="Arbitrage-free discrete LIBOR market models on a time grid",
    long_description=long_description,
    license="BSD",
    zip_safe=False,
    packages=find_packages(exclude=["tests"]),
    include_package_data=True,
    package_data={"lmmgrid": ["configs/*.json"]},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.4",
        "click>=7.0",
        "svgwrite~=1.4",
    ],
    extras_require={"tests": ["pytest>=6.0", "hypothesis>=5.0"]},
    entry_points={"console_scripts": ["lmmgrid = lmmgrid.cli:main"]},
)
