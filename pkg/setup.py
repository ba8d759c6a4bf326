# setup.py
from pathlib import Path
from setuptools import setup, find_packages


def read_requirements(file: str):
    reqs = []
    for line in Path(file).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            reqs.append(line)
    return reqs


setup(
    name="sketchfl",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["config"],
    python_requires=">=3.10",  # tomllib on 3.11+, tomli backport on 3.10
    install_requires=read_requirements("requirements.txt"),
    entry_points={
        "console_scripts": [
            "sketchfl=cli.main:main",
        ],
    },
)
