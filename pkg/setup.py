from setuptools import setup, find_packages

with open("README.md", encoding="utf-8") as f:
    long_description = f.read()

with open("leobandit/__init__.py", encoding="utf-8") as f:
    __version__ = next(line.split("=")[1].strip().strip('"') for line in f if line.startswith("__version__"))

setup(
    name="leobandit",
    packages=find_packages(include=["leobandit", "leobandit.*"]),
    version=__version__,
    license="MIT",
    description="Multi-LEO satellite simulator with hierarchical bandit allocation of power, beams and sub-channels",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords=["LEO satellites", "multi-armed bandits", "resource allocation", "beam hopping", "simulation"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Education",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
        "Topic :: Communications",
    ],
    install_requires=["numpy>=1.22", "scipy>=1.8", "pandas>=1.5", "tqdm>=4.60"],
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["leobandit=leobandit.cli:main"]},
    python_requires=">=3.8",
)
