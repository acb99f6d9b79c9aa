"""Build adult_prepared.csv from the UCI Adult files.

usage: python prepare_adult.py adult.data adult.test adult_prepared.csv
"""

import sys

import pandas as pd

RAW = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]
KEEP = [
    "age", "workclass", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "sex", "income",
]


def read(path):
    # adult.test starts with a junk line and has labels ending in "."
    skip = 1 if path.endswith(".test") else 0
    df = pd.read_csv(path, names=RAW, skiprows=skip, skipinitialspace=True,
                     na_values="?", dtype=str)
    df["income"] = df["income"].str.rstrip(".")
    return df


def main(train, test, out):
    df = pd.concat([read(train), read(test)], ignore_index=True)
    df = df.dropna()[KEEP]
    df.to_csv(out, index=False)
    print(f"{len(df)} rows written to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:4])
