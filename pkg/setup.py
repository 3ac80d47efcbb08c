from setuptools import find_packages, setup

setup(
    name="rnproj",
    version="0.1.0",
    description="Risk-neutral moments, distributions and dependence by payoff projection",
    packages=find_packages(include=["rnproj", "rnproj.*", "config"]),
    package_data={"config": ["*.json", "experiments/*.json"]},
    include_package_data=True,
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "flask>=3.0",
    ],
    extras_require={"test": ["pytest>=7"]},
    entry_points={
        "console_scripts": [
            "rnproj=rnproj.cli:main",
            "rnproj-web=rnproj.web.app:main",
        ],
    },
)
