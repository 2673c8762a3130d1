"""Setup for grassmann-prom."""

from setuptools import find_packages, setup

with open("README.md") as f:
    readme = f.read()

# Runtime requirements.
inst_reqs = ["numpy", "attrs", "scipy", "pandas"]

extra_reqs = {
    "test": ["pytest", "pytest-benchmark"],
}


setup(
    name="grassmann-prom",
    version="0.1.0",
    python_requires=">=3.9",
    description="Parametric reduced-order models of hysteretic structures",
    long_description=readme,
    long_description_content_type="text/markdown",
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering",
    ],
    keywords="reduced order model pod grassmann ecsw bouc-wen structural dynamics",
    license="MIT",
    packages=find_packages(exclude=["ez_setup", "scripts", "examples", "test"]),
    include_package_data=True,
    zip_safe=False,
    install_requires=inst_reqs,
    extras_require=extra_reqs,
    entry_points={
        "console_scripts": ["grassmann-prom=grassmann_prom.cli:main"],
    },
)
