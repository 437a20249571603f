from setuptools import setup, find_packages

with open('README.md', 'r', encoding='utf-8') as fh:
    long_description = fh.read()

with open('requirements.txt', 'r', encoding='utf-8') as f:
    requirements = [line.strip() for line in f
                    if line.strip() and not line.startswith('#') and not line.startswith('pytest')]

setup(
    name="afry-txt2box",
    version="1.0.0",
    author="AFRY",
    author_email="your.email@afry.com",
    description="Unsupervised textual grounding: find the image box a text query refers to",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/rosbache/afry-txt2box",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    py_modules=["main"],
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    extras_require={
        'test': ['pytest>=7.0'],
    },
    entry_points={
        'console_scripts': [
            'ground=main:main',
        ],
    },
    include_package_data=True,
)
