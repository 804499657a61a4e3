from setuptools import find_packages, setup

from uqtab import __version__

setup(
    name="uqtab",
    version=__version__,
    description="Uncertainty-aware tabular classification: SMOTE, Boruta, classical baselines, NUTS-sampled BNNs and exact SHAP",
    packages=find_packages(exclude=["tests"]),
    package_data={"uqtab": ["modules/*/templates/*.j2", "shared/templates/*.j2"]},
    python_requires=">=3.10",
    install_requires=[
        "click>=8.1",
        "Jinja2>=3.1",
        "numpy>=1.26",
        "pandas>=2.0",
        "psutil>=5.9",
        "pydantic>=2.5",
        "python-dotenv>=1.0",
        "PyYAML>=6.0",
        "scipy>=1.11",
    ],
    extras_require={"test": ["pytest>=7.4"]},
    entry_points={"console_scripts": ["uqtab=uqtab.main:main"]},
)
