from setuptools import find_packages, setup

setup(name='thinfilm',
    version='0.1.0',
    description="Minimizing-movement solver and theorem checks for the exponential thin-film equation",
    keywords="gradient flow, minimizing movement, thin film, crystal surface, proximal scheme",
    package_dir={"": "src"},
    packages=find_packages(where="src", exclude=["tests", "validation"]),
    install_requires=[
        "numpy>=1.23",
        "scipy>=1.12",
        "click>=8.1",
        "joblib>=1.1",
        "jsons>=1.6",
    ],
    entry_points={"console_scripts": ["thinfilm=thinfilm.cli:main"]},
    python_requires=">=3.9",
    license = "MIT"
    )
