import sys
import pandas as pd


if __name__ == "__main__":
    summary_csv_path = sys.argv[1]
    summary_df = pd.read_csv(summary_csv_path)
    print(summary_df.groupby(["kind", "status"])["case_id"].count().unstack(fill_value=0))
    print("-"*50)
    print(summary_df.groupby("kind")["seconds"].describe()[["count", "mean", "max"]])
    print("-"*50)
    print(summary_df.groupby("status")["failed_stage"].value_counts())
